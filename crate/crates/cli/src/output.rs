use std::io::{IsTerminal, Write};

use clap::ValueEnum;
use serde_json::Value;

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Format {
    Text,
    Json,
}

/// Where reports go. Text is printed as it is produced; JSON is one document at the end.
pub struct Out {
    pub format: Format,
    color: bool,
}

impl Out {
    pub fn new(format: Format) -> Self {
        let color = match std::env::var("GAG_COLOR").as_deref() {
            Ok("never") => false,
            _ => std::io::stdout().is_terminal(),
        };
        Out { format, color }
    }

    pub fn text(&self) -> bool {
        self.format == Format::Text
    }

    pub fn line(&self, s: impl AsRef<str>) {
        if self.text() {
            emit(&format!("{}\n", s.as_ref()));
        }
    }

    /// Text block, printed as is.
    pub fn block(&self, s: &str) {
        if self.text() {
            emit(s);
        }
    }

    pub fn json(&self, v: &Value) {
        if !self.text() {
            emit(&format!("{}\n", serde_json::to_string_pretty(v).expect("json value")));
        }
    }

    /// A verdict word, green when good and red otherwise.
    pub fn mark(&self, word: &str, good: bool) -> String {
        if self.color {
            format!("\x1b[{}m{word}\x1b[0m", if good { 32 } else { 31 })
        } else {
            word.to_string()
        }
    }
}

/// Writes to stdout; a reader that went away (`gag ... | head`) ends the process quietly.
fn emit(s: &str) {
    let mut stdout = std::io::stdout().lock();
    if let Err(e) = stdout.write_all(s.as_bytes()).and_then(|()| stdout.flush()) {
        if e.kind() == std::io::ErrorKind::BrokenPipe {
            std::process::exit(0);
        }
        panic!("cannot write to stdout: {e}");
    }
}
