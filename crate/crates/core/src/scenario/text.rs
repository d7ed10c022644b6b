//! Line-oriented sectioned text: `[section]` headers and `key = value`.

use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    /// 1-based line, when the error has a location.
    pub line: Option<usize>,
    pub msg: String,
}

impl ConfigError {
    pub fn at(line: usize, msg: impl Into<String>) -> Self {
        ConfigError {
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub fn global(msg: impl Into<String>) -> Self {
        ConfigError {
            line: None,
            msg: msg.into(),
        }
    }
}

impl fmt::Display for ConfigError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.line {
            Some(l) => write!(f, "line {l}: {}", self.msg),
            None => f.write_str(&self.msg),
        }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Entry {
    pub key: String,
    pub value: String,
    pub line: usize,
    taken: bool,
}

/// One `[a.b.c]` section; `kind` is `a`, `args` the remaining dotted parts.
#[derive(Debug, Clone)]
pub(crate) struct Section {
    pub kind: String,
    pub args: Vec<String>,
    pub line: usize,
    entries: Vec<Entry>,
}

pub(crate) fn parse_sections(text: &str) -> Result<Vec<Section>, Vec<ConfigError>> {
    let mut out: Vec<Section> = Vec::new();
    let mut errs = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let s = raw.trim();
        if s.is_empty() || s.starts_with('#') {
            continue;
        }
        if let Some(inner) = s.strip_prefix('[') {
            let Some(name) = inner.strip_suffix(']') else {
                errs.push(ConfigError::at(line, "unterminated section header"));
                continue;
            };
            let parts: Vec<String> = name.trim().split('.').map(|p| p.trim().to_string()).collect();
            if parts.iter().any(|p| p.is_empty()) {
                errs.push(ConfigError::at(line, format!("malformed section name '{name}'")));
                continue;
            }
            let full = parts.join(".");
            if let Some(prev) = out.iter().find(|s| s.full_name() == full) {
                errs.push(ConfigError::at(
                    line,
                    format!("section [{full}] repeats line {}", prev.line),
                ));
            }
            out.push(Section {
                kind: parts[0].clone(),
                args: parts[1..].to_vec(),
                line,
                entries: Vec::new(),
            });
            continue;
        }
        let Some((k, v)) = s.split_once('=') else {
            errs.push(ConfigError::at(line, format!("expected 'key = value', found '{s}'")));
            continue;
        };
        let (k, v) = (k.trim(), v.trim());
        let Some(sec) = out.last_mut() else {
            errs.push(ConfigError::at(line, format!("key '{k}' outside any section")));
            continue;
        };
        if k.is_empty() {
            errs.push(ConfigError::at(line, "empty key"));
            continue;
        }
        if let Some(prev) = sec.entries.iter().find(|e| e.key == k) {
            errs.push(ConfigError::at(line, format!("key '{k}' repeats line {}", prev.line)));
            continue;
        }
        sec.entries.push(Entry {
            key: k.to_string(),
            value: v.to_string(),
            line,
            taken: false,
        });
    }
    if errs.is_empty() {
        Ok(out)
    } else {
        Err(errs)
    }
}

impl Section {
    pub fn full_name(&self) -> String {
        std::iter::once(self.kind.as_str())
            .chain(self.args.iter().map(String::as_str))
            .collect::<Vec<_>>()
            .join(".")
    }

    pub fn take(&mut self, key: &str) -> Option<(String, usize)> {
        let e = self.entries.iter_mut().find(|e| e.key == key)?;
        e.taken = true;
        Some((e.value.clone(), e.line))
    }

    pub fn has(&self, key: &str) -> bool {
        self.entries.iter().any(|e| e.key == key)
    }

    pub fn parsed<T: FromStr>(&mut self, key: &str, errs: &mut Vec<ConfigError>) -> Option<T> {
        let (v, line) = self.take(key)?;
        match v.parse::<T>() {
            Ok(x) => Some(x),
            Err(_) => {
                errs.push(ConfigError::at(
                    line,
                    format!("[{}] {key}: cannot parse '{v}'", self.full_name()),
                ));
                None
            }
        }
    }

    pub fn or<T: FromStr>(&mut self, key: &str, default: T, errs: &mut Vec<ConfigError>) -> T {
        self.parsed(key, errs).unwrap_or(default)
    }

    pub fn f64(&mut self, key: &str, default: f64, errs: &mut Vec<ConfigError>) -> f64 {
        let v = self.or(key, default, errs);
        if !v.is_finite() {
            errs.push(ConfigError::at(
                self.line,
                format!("[{}] {key} must be finite", self.full_name()),
            ));
        }
        v
    }

    pub fn required<T: FromStr>(&mut self, key: &str, errs: &mut Vec<ConfigError>) -> Option<T> {
        if !self.has(key) {
            errs.push(ConfigError::at(
                self.line,
                format!("[{}] is missing '{key}'", self.full_name()),
            ));
            return None;
        }
        self.parsed(key, errs)
    }

    pub fn string(&mut self, key: &str) -> Option<String> {
        self.take(key).map(|(v, _)| v)
    }

    pub fn line_of(&self, key: &str) -> usize {
        self.entries.iter().find(|e| e.key == key).map_or(self.line, |e| e.line)
    }

    /// Comma-separated list, empty items dropped.
    pub fn list(&mut self, key: &str) -> Option<(Vec<String>, usize)> {
        let (v, line) = self.take(key)?;
        Some((
            v.split(',')
                .map(|s| s.trim().to_string())
                .filter(|s| !s.is_empty())
                .collect(),
            line,
        ))
    }

    /// `name:value, ...` pairs.
    pub fn pairs(&mut self, key: &str, errs: &mut Vec<ConfigError>) -> Option<Vec<(String, f64)>> {
        let (items, line) = self.list(key)?;
        let mut out = Vec::new();
        for it in items {
            match it.split_once(':').map(|(n, v)| (n.trim(), v.trim().parse::<f64>())) {
                Some((n, Ok(v))) if !n.is_empty() => out.push((n.to_string(), v)),
                _ => errs.push(ConfigError::at(
                    line,
                    format!("{key}: expected 'name:number', found '{it}'"),
                )),
            }
        }
        Some(out)
    }

    /// `a-b, ...` hour windows.
    pub fn windows(&mut self, key: &str, errs: &mut Vec<ConfigError>) -> Option<Vec<(f64, f64)>> {
        let (items, line) = self.list(key)?;
        let mut out = Vec::new();
        for it in items {
            match it
                .split_once('-')
                .map(|(a, b)| (a.trim().parse::<f64>(), b.trim().parse::<f64>()))
            {
                Some((Ok(a), Ok(b))) if a < b => out.push((a, b)),
                _ => errs.push(ConfigError::at(
                    line,
                    format!("{key}: expected 'start-end' hours, found '{it}'"),
                )),
            }
        }
        Some(out)
    }

    /// Reports every key nobody asked for.
    pub fn finish(self, errs: &mut Vec<ConfigError>) {
        for e in self.entries.iter().filter(|e| !e.taken) {
            errs.push(ConfigError::at(
                e.line,
                format!("unknown key '{}' in [{}]", e.key, self.full_name()),
            ));
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn sections_and_keys() {
        let mut s = parse_sections("# c\n[a]\n  x = 1\n[b.c.d]\ny= two words \n").unwrap();
        assert_eq!(s.len(), 2);
        assert_eq!(s[1].kind, "b");
        assert_eq!(s[1].args, vec!["c", "d"]);
        assert_eq!(s[1].take("y").unwrap(), ("two words".to_string(), 5));
        let mut errs = Vec::new();
        assert_eq!(s[0].f64("x", 0.0, &mut errs), 1.0);
        assert!(errs.is_empty());
    }

    #[test]
    fn unknown_and_duplicate_keys() {
        let e = parse_sections("[a]\nx=1\nx=2\n").unwrap_err();
        assert_eq!(e[0].line, Some(3));
        let mut s = parse_sections("[a]\nx=1\nxx=2\n").unwrap();
        let mut errs = Vec::new();
        s[0].f64("x", 0.0, &mut errs);
        s.remove(0).finish(&mut errs);
        assert_eq!(errs.len(), 1);
        assert!(errs[0].msg.contains("unknown key 'xx'"));
    }

    #[test]
    fn orphan_key_and_bad_header() {
        assert!(parse_sections("x = 1").is_err());
        assert!(parse_sections("[a").is_err());
        assert!(parse_sections("[a..b]").is_err());
    }
}
