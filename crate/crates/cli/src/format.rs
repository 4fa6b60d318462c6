//! Number and report formatting.
//!
//! Record values use Rust's shortest round-trip rendering (`{:?}`), so every
//! printed float parses back to the identical `f64`.

use mpsc_core::stationarity::MultiplierVector;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputMode {
    Text,
    Records,
}

/// Accumulated output of one command, rendered in one mode only.
#[derive(Clone, Debug)]
pub struct Report {
    mode: OutputMode,
    lines: Vec<String>,
}

impl Report {
    pub fn new(mode: OutputMode) -> Self {
        Self { mode, lines: Vec::new() }
    }

    pub fn mode(&self) -> OutputMode {
        self.mode
    }

    /// A human-readable line (text mode only).
    pub fn text(&mut self, line: impl Into<String>) {
        if self.mode == OutputMode::Text {
            self.lines.push(line.into());
        }
    }

    /// A `KEY<TAB>VALUE` record (records mode only).
    pub fn rec(&mut self, key: impl AsRef<str>, value: impl Into<String>) {
        if self.mode == OutputMode::Records {
            let value = value.into();
            debug_assert!(!value.contains('\n') && !value.contains('\t'));
            self.lines.push(format!("{}\t{}", key.as_ref(), value));
        }
    }

    pub fn append(&mut self, other: Report) {
        self.lines.extend(other.lines);
    }

    pub fn render(&self) -> String {
        let mut s = self.lines.join("\n");
        if !s.is_empty() {
            s.push('\n');
        }
        s
    }
}

/// Record rendering of a float (shortest round-trip, no negative zero).
pub fn num(x: f64) -> String {
    format!("{:?}", x + 0.0)
}

pub fn nums(v: &[f64]) -> String {
    v.iter().map(|x| num(*x)).collect::<Vec<_>>().join(",")
}

/// Text rendering of a float.
pub fn tnum(x: f64) -> String {
    let x = x + 0.0;
    if x == 0.0 || (1e-4..1e12).contains(&x.abs()) || !x.is_finite() {
        format!("{x}")
    } else {
        format!("{x:e}")
    }
}

pub fn tvec(v: &[f64]) -> String {
    format!("({})", v.iter().map(|x| tnum(*x)).collect::<Vec<_>>().join(", "))
}

/// 1-based index set, `{1, 3}`.
pub fn tset(v: &[usize]) -> String {
    format!("{{{}}}", v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(", "))
}

/// 1-based index list for records, `1,3`.
pub fn rset(v: &[usize]) -> String {
    v.iter().map(|i| (i + 1).to_string()).collect::<Vec<_>>().join(",")
}

/// Multiplier groups `g;h;G;H` for records.
pub fn rmult(m: &MultiplierVector) -> String {
    [&m.g, &m.h, &m.big_g, &m.big_h].iter().map(|v| nums(v)).collect::<Vec<_>>().join(";")
}

/// Record key fragment: spaces become underscores.
pub fn key(label: &str) -> String {
    label.replace(' ', "_")
}

/// Parses `a,b,c` into floats.
pub fn parse_list(s: &str) -> Result<Vec<f64>, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("`{t}` is not a number")))
        .collect()
}
