use std::fmt::Display;
use std::path::Path;

use crate::error::{CliError, CliResult};

/// One line per event, `event=<name> key=value ...`. No timestamps, so the
/// log is as reproducible as the outputs it describes.
#[derive(Debug, Default)]
pub struct RunLog {
    lines: Vec<String>,
}

impl RunLog {
    pub fn event(&mut self, name: &str, fields: &[(&str, &dyn Display)]) {
        let mut line = format!("event={name}");
        for (key, value) in fields {
            let value = value.to_string();
            if value.is_empty() || value.contains(char::is_whitespace) || value.contains('"') {
                line.push_str(&format!(" {key}={value:?}"));
            } else {
                line.push_str(&format!(" {key}={value}"));
            }
        }
        self.lines.push(line);
    }

    pub fn lines(&self) -> &[String] {
        &self.lines
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let mut text = self.lines.join("\n");
        text.push('\n');
        std::fs::write(path, text).map_err(|e| CliError::io(path, e))
    }
}
