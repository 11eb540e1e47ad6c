//! Text pixmap of a configuration: one character per cell, `1` for a cell of
//! a 1-item, `2` for a cell of a 2-item, `.` for an empty cell.
//!
//! The same text is the stored-configuration format. When parsing, lines
//! starting with `#` and all whitespace are ignored, and runs of `2` pair up
//! left to right.

use crate::error::ModelError;
use crate::model::{CellState, Configuration, ItemKind};

/// Renders cells from 0 upward, `cells_per_row` per row. Rows past the last
/// occupied cell are omitted; the last row is padded with `.`.
pub fn render_snapshot(config: &Configuration, cells_per_row: usize) -> Vec<String> {
    assert!(cells_per_row >= 1, "cells_per_row must be positive");
    let extent = config.extent();
    let rows = extent.div_ceil(cells_per_row);
    (0..rows)
        .map(|row| {
            (row * cells_per_row..(row + 1) * cells_per_row)
                .map(|c| match config.cell(c) {
                    CellState::Empty => '.',
                    CellState::One => '1',
                    CellState::TwoHead | CellState::TwoTail => '2',
                })
                .collect()
        })
        .collect()
}

/// Rows joined with newlines, one trailing newline per row.
pub fn render_text(config: &Configuration, cells_per_row: usize) -> String {
    let mut out = String::new();
    for row in render_snapshot(config, cells_per_row) {
        out.push_str(&row);
        out.push('\n');
    }
    out
}

/// Parses the pixmap format. Item ids are assigned in start order.
pub fn parse_snapshot(text: &str) -> Result<Configuration, ModelError> {
    let mut config = Configuration::new();
    let mut cell = 0usize;
    // Position of an unpaired `2`.
    let mut pending_two: Option<(usize, usize)> = None;
    for (line_no, line) in text.lines().enumerate() {
        if line.trim_start().starts_with('#') {
            continue;
        }
        for (col, ch) in line.chars().enumerate() {
            let at = (line_no + 1, col + 1);
            match ch {
                c if c.is_whitespace() => continue,
                '2' => {
                    if pending_two.take().is_some() {
                        config.place_at(ItemKind::Two, cell - 1)?;
                    } else {
                        pending_two = Some(at);
                    }
                }
                '1' | '.' => {
                    if let Some((line, column)) = pending_two {
                        return Err(odd_two_run(line, column));
                    }
                    if ch == '1' {
                        config.place_at(ItemKind::One, cell)?;
                    }
                }
                other => {
                    return Err(ModelError::Snapshot {
                        line: at.0,
                        column: at.1,
                        message: format!("unexpected character {other:?}"),
                    })
                }
            }
            cell += 1;
        }
    }
    if let Some((line, column)) = pending_two {
        return Err(odd_two_run(line, column));
    }
    Ok(config)
}

fn odd_two_run(line: usize, column: usize) -> ModelError {
    ModelError::Snapshot {
        line,
        column,
        message: "a 2-item needs two consecutive '2' cells".into(),
    }
}
