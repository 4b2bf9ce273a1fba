//! Deterministic structured-text reports: fixed entry order, no timestamps,
//! floats printed with Rust's shortest round-trip formatting, so identical
//! inputs produce byte-identical output.

/// One report entry.
#[derive(Debug, Clone)]
enum Entry {
    KeyValue(String, String),
    Check { name: String, value: f64, tol: f64, pass: bool },
    Note(String),
}

/// A named collection of key-value pairs and pass/fail checks.
#[derive(Debug, Clone)]
pub struct Report {
    title: String,
    entries: Vec<Entry>,
}

impl Report {
    pub fn new(title: impl Into<String>) -> Self {
        Self { title: title.into(), entries: Vec::new() }
    }

    pub fn kv(&mut self, key: &str, value: impl std::fmt::Display) {
        self.entries.push(Entry::KeyValue(key.to_string(), value.to_string()));
    }

    pub fn note(&mut self, text: impl Into<String>) {
        self.entries.push(Entry::Note(text.into()));
    }

    /// Record a defect against its tolerance; passes when `value <= tol`
    /// (NaN never passes). Returns the outcome.
    pub fn check(&mut self, name: &str, value: f64, tol: f64) -> bool {
        let pass = value <= tol && value.is_finite();
        self.entries.push(Entry::Check { name: name.to_string(), value, tol, pass });
        pass
    }

    /// Record a boolean condition as a 0/1-valued check.
    pub fn check_bool(&mut self, name: &str, ok: bool) -> bool {
        let value = if ok { 0.0 } else { 1.0 };
        self.entries.push(Entry::Check { name: name.to_string(), value, tol: 0.5, pass: ok });
        ok
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| match e {
            Entry::Check { pass, .. } => *pass,
            _ => true,
        })
    }

    pub fn failing(&self) -> Vec<&str> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                Entry::Check { name, pass: false, .. } => Some(name.as_str()),
                _ => None,
            })
            .collect()
    }

    pub fn check_count(&self) -> (usize, usize) {
        let total = self
            .entries
            .iter()
            .filter(|e| matches!(e, Entry::Check { .. }))
            .count();
        let passed = self
            .entries
            .iter()
            .filter(|e| matches!(e, Entry::Check { pass: true, .. }))
            .count();
        (passed, total)
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("# {}\n", self.title));
        for e in &self.entries {
            match e {
                Entry::KeyValue(k, v) => out.push_str(&format!("{k} = {v}\n")),
                Entry::Note(n) => out.push_str(&format!("note: {n}\n")),
                Entry::Check { name, value, tol, pass } => {
                    let status = if *pass { "pass" } else { "FAIL" };
                    out.push_str(&format!("[{status}] {name}: defect = {value:e} (tol {tol:e})\n"));
                }
            }
        }
        let (passed, total) = self.check_count();
        out.push_str(&format!("checks: {passed}/{total} passed\n"));
        out
    }

    /// One line per check, for terminal summaries.
    pub fn summary_lines(&self) -> Vec<String> {
        self.entries
            .iter()
            .filter_map(|e| match e {
                Entry::Check { name, value, tol, pass } => {
                    let status = if *pass { "pass" } else { "FAIL" };
                    Some(format!("[{status}] {name}: defect = {value:e} (tol {tol:e})"))
                }
                _ => None,
            })
            .collect()
    }
}

/// Render a two-column CSV with a header line.
pub fn csv_two_columns(header: (&str, &str), rows: &[(f64, f64)]) -> String {
    let mut out = format!("{},{}\n", header.0, header.1);
    for (a, b) in rows {
        out.push_str(&format!("{a:e},{b:e}\n"));
    }
    out
}
