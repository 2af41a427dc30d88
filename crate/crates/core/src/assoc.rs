//! Sparse associative triple store.
//!
//! A single-process sorted map keyed by `(row, col)`. Rows are node names and
//! columns are metric paths by convention (see `history::frame_to_store`),
//! but the store itself attaches no meaning to either.
//!
//! Persisted as UTF-8 text, one `row<TAB>col<TAB>val` line per triple in
//! sorted order. Tabs, newlines, carriage returns and backslashes inside
//! fields are written as `\t`, `\n`, `\r` and `\\`.

use std::cmp::Ordering;
use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::io::Write;
use std::ops::Bound;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{FormatError, InputError, TwinError};
use crate::glob::Glob;

/// A cell value: numeric when the source text is a canonical number.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Value {
    Num(f64),
    Str(String),
}

impl Value {
    /// Classifies untyped text. Text becomes a number only when it is the
    /// canonical rendering of that number, so `"007"` stays a string and
    /// every value survives a save/load cycle unchanged.
    pub fn from_text(text: &str) -> Value {
        match text.parse::<f64>() {
            Ok(n) if n.is_finite() && format_num(n) == text => Value::Num(n),
            _ => Value::Str(text.to_string()),
        }
    }

    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Num(n) => Some(*n),
            Value::Str(s) => s.parse().ok(),
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            Value::Str(s) => Some(s),
            Value::Num(_) => None,
        }
    }

    /// Numeric order when both sides read as numbers, text order otherwise.
    pub fn compare(&self, other: &Value) -> Ordering {
        match (self.as_f64(), other.as_f64()) {
            (Some(a), Some(b)) => a.total_cmp(&b),
            _ => self.to_string().cmp(&other.to_string()),
        }
    }
}

pub(crate) fn format_num(n: f64) -> String {
    format!("{n}")
}

impl fmt::Display for Value {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Value::Num(n) => write!(f, "{}", format_num(*n)),
            Value::Str(s) => f.write_str(s),
        }
    }
}

impl From<f64> for Value {
    fn from(n: f64) -> Self {
        Value::Num(n)
    }
}

impl From<&str> for Value {
    fn from(s: &str) -> Self {
        Value::Str(s.to_string())
    }
}

impl From<String> for Value {
    fn from(s: String) -> Self {
        Value::Str(s)
    }
}

/// One `(row, col, val)` entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssocTriple {
    pub row: String,
    pub col: String,
    pub val: Value,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct AssocStore {
    cells: BTreeMap<(String, String), Value>,
}

impl AssocStore {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    /// Inserts or overwrites the value at `(row, col)`.
    pub fn insert(
        &mut self,
        row: impl Into<String>,
        col: impl Into<String>,
        val: impl Into<Value>,
    ) -> Result<(), InputError> {
        let (row, col) = (row.into(), col.into());
        if row.is_empty() {
            return Err(InputError::EmptyKey("row"));
        }
        if col.is_empty() {
            return Err(InputError::EmptyKey("col"));
        }
        self.cells.insert((row, col), val.into());
        Ok(())
    }

    pub fn get(&self, row: &str, col: &str) -> Option<&Value> {
        self.cells.get(&(row.to_string(), col.to_string()))
    }

    /// Triples in `(row, col)` order.
    pub fn iter(&self) -> impl Iterator<Item = (&str, &str, &Value)> {
        self.cells
            .iter()
            .map(|((r, c), v)| (r.as_str(), c.as_str(), v))
    }

    pub fn triples(&self) -> Vec<AssocTriple> {
        self.iter()
            .map(|(row, col, val)| AssocTriple {
                row: row.to_string(),
                col: col.to_string(),
                val: val.clone(),
            })
            .collect()
    }

    /// Distinct row keys in order.
    pub fn rows(&self) -> Vec<&str> {
        let mut out: Vec<&str> = Vec::new();
        for (r, _) in self.cells.keys() {
            if out.last() != Some(&r.as_str()) {
                out.push(r);
            }
        }
        out
    }

    /// Sub-store of triples whose row and col match the given globs.
    pub fn query(&self, row_pattern: &str, col_pattern: &str) -> Result<AssocStore, InputError> {
        let rows = Glob::new(row_pattern)?;
        let cols = Glob::new(col_pattern)?;
        Ok(self.query_globs(&rows, &cols))
    }

    pub fn query_globs(&self, rows: &Glob, cols: &Glob) -> AssocStore {
        let prefix = rows.literal_prefix();
        let start = Bound::Included((prefix.clone(), String::new()));
        let cells = self
            .cells
            .range((start, Bound::Unbounded))
            .take_while(|((r, _), _)| r.starts_with(&prefix))
            .filter(|((r, c), _)| rows.matches(r) && cols.matches(c))
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        AssocStore { cells }
    }

    /// Writes the store in its text form.
    pub fn write_to(&self, out: &mut impl Write) -> std::io::Result<()> {
        for (row, col, val) in self.iter() {
            writeln!(
                out,
                "{}\t{}\t{}",
                escape(row),
                escape(col),
                escape(&val.to_string())
            )?;
        }
        Ok(())
    }

    pub fn to_text(&self) -> String {
        let mut buf = Vec::new();
        self.write_to(&mut buf).expect("writing to a Vec cannot fail");
        String::from_utf8(buf).expect("store content is UTF-8")
    }

    /// Parses the text form. `origin` names the source in errors.
    pub fn from_text(text: &str, origin: &str) -> Result<AssocStore, FormatError> {
        let mut store = AssocStore::new();
        for (idx, line) in text.split('\n').enumerate() {
            if line.is_empty() {
                continue;
            }
            let err = |message: String| FormatError {
                path: origin.to_string(),
                line: idx + 1,
                message,
            };
            let fields: Vec<&str> = line.split('\t').collect();
            let [row, col, val] = fields[..] else {
                return Err(err(format!("expected 3 tab-separated fields, found {}", fields.len())));
            };
            let row = unescape(row).map_err(&err)?;
            let col = unescape(col).map_err(&err)?;
            let val = Value::from_text(&unescape(val).map_err(&err)?);
            store.insert(row, col, val).map_err(|e| err(e.to_string()))?;
        }
        Ok(store)
    }

    /// Saves via a temporary sibling file and a rename.
    pub fn save(&self, path: &Path) -> Result<(), TwinError> {
        write_atomic(path, self.to_text().as_bytes())
    }

    pub fn load(path: &Path) -> Result<AssocStore, TwinError> {
        let text = fs::read_to_string(path).map_err(|e| TwinError::io(path, e))?;
        Ok(AssocStore::from_text(&text, &path.display().to_string())?)
    }
}

impl FromIterator<AssocTriple> for AssocStore {
    /// Builds a store; triples with empty keys are dropped.
    fn from_iter<I: IntoIterator<Item = AssocTriple>>(iter: I) -> Self {
        let mut store = AssocStore::new();
        for t in iter {
            let _ = store.insert(t.row, t.col, t.val);
        }
        store
    }
}

pub(crate) fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), TwinError> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    let write = || -> std::io::Result<()> {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
        fs::rename(&tmp, path)
    };
    write().map_err(|e| TwinError::io(path, e))
}

fn escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '\t' => out.push_str("\\t"),
            '\n' => out.push_str("\\n"),
            '\r' => out.push_str("\\r"),
            c => out.push(c),
        }
    }
    out
}

fn unescape(s: &str) -> Result<String, String> {
    let mut out = String::with_capacity(s.len());
    let mut chars = s.chars();
    while let Some(c) = chars.next() {
        if c != '\\' {
            out.push(c);
            continue;
        }
        match chars.next() {
            Some('\\') => out.push('\\'),
            Some('t') => out.push('\t'),
            Some('n') => out.push('\n'),
            Some('r') => out.push('\r'),
            other => return Err(format!("bad escape sequence `\\{}`", other.map(String::from).unwrap_or_default())),
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use std::collections::HashMap;

    #[test]
    fn read_your_write() {
        let mut s = AssocStore::new();
        s.insert("node-001", "cpu_load", 0.5).unwrap();
        assert_eq!(s.get("node-001", "cpu_load"), Some(&Value::Num(0.5)));
    }

    #[test]
    fn last_write_wins() {
        let mut s = AssocStore::new();
        s.insert("node-001", "cpu_load", 0.2).unwrap();
        s.insert("node-001", "cpu_load", 0.9).unwrap();
        assert_eq!(s.get("node-001", "cpu_load"), Some(&Value::Num(0.9)));
        assert_eq!(s.len(), 1);
    }

    #[test]
    fn empty_keys_rejected() {
        let mut s = AssocStore::new();
        assert_eq!(s.insert("", "c", 1.0), Err(InputError::EmptyKey("row")));
        assert_eq!(s.insert("r", "", 1.0), Err(InputError::EmptyKey("col")));
        assert!(s.is_empty());
    }

    #[test]
    fn random_inserts_match_nested_map() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let mut store = AssocStore::new();
        let mut oracle: HashMap<String, HashMap<String, f64>> = HashMap::new();
        for _ in 0..10_000 {
            let row = format!("node-{:03}", rng.gen_range(0..200));
            let col = format!("m{}", rng.gen_range(0..30));
            let v = rng.gen_range(0..1000) as f64 / 8.0;
            store.insert(row.clone(), col.clone(), v).unwrap();
            oracle.entry(row).or_default().insert(col, v);
        }
        let n: usize = oracle.values().map(|m| m.len()).sum();
        assert_eq!(store.len(), n);
        for (row, cols) in &oracle {
            for (col, v) in cols {
                assert_eq!(store.get(row, col), Some(&Value::Num(*v)));
            }
        }
    }

    #[test]
    fn query_examples() {
        let empty = AssocStore::new();
        assert!(empty.query("*", "*").unwrap().is_empty());

        let mut s = AssocStore::new();
        for c in ["a", "b", "c"] {
            s.insert("node-001", c, 1.0).unwrap();
        }
        for c in ["a", "b"] {
            s.insert("node-002", c, 2.0).unwrap();
        }
        assert_eq!(s.query("node-001", "*").unwrap().len(), 3);
        assert_eq!(s.query("node-00?", "a").unwrap().len(), 2);
        assert!(s.query("node-[12]", "*").is_err());
    }

    #[test]
    fn query_order_is_lexicographic() {
        let mut s = AssocStore::new();
        s.insert("b", "y", 1.0).unwrap();
        s.insert("a", "z", 1.0).unwrap();
        s.insert("b", "x", 1.0).unwrap();
        let keys: Vec<_> = s
            .query("*", "*")
            .unwrap()
            .iter()
            .map(|(r, c, _)| format!("{r}/{c}"))
            .collect();
        assert_eq!(keys, ["a/z", "b/x", "b/y"]);
    }

    #[test]
    fn value_classification() {
        assert_eq!(Value::from_text("0.5"), Value::Num(0.5));
        assert_eq!(Value::from_text("007"), Value::Str("007".into()));
        assert_eq!(Value::from_text("1e3"), Value::Str("1e3".into()));
        assert_eq!(Value::from_text("alice"), Value::Str("alice".into()));
        assert_eq!(Value::Num(2.0).compare(&Value::Str("10".into())), Ordering::Less);
        assert_eq!(Value::from("b").compare(&Value::from("a")), Ordering::Greater);
    }

    #[test]
    fn save_load() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("t.tsv");
        let mut s = AssocStore::new();
        s.insert("r\t1", "c\\x", "multi\nline").unwrap();
        s.insert("r2", "v", 1.25).unwrap();
        s.save(&path).unwrap();
        let text = fs::read_to_string(&path).unwrap();
        assert_eq!(text, "r\\t1\tc\\\\x\tmulti\\nline\nr2\tv\t1.25\n");
        assert_eq!(AssocStore::load(&path).unwrap(), s);
    }

    #[test]
    fn malformed_text_reports_line() {
        let err = AssocStore::from_text("a\tb\t1\nbad line\n", "x.tsv").unwrap_err();
        assert_eq!(err.line, 2);
    }

    fn key() -> impl Strategy<Value = String> {
        "[a-c\\t\\\\]{1,4}"
    }

    proptest! {
        #[test]
        fn text_round_trip(entries in proptest::collection::vec((key(), key(), prop_oneof![
            any::<i32>().prop_map(|n| Value::Num(n as f64 / 4.0)),
            "[ -~\\t\\n]{0,6}".prop_map(|s| Value::from_text(&s)),
        ]), 0..40)) {
            let mut s = AssocStore::new();
            for (r, c, v) in entries {
                s.insert(r, c, v).unwrap();
            }
            let back = AssocStore::from_text(&s.to_text(), "p").unwrap();
            prop_assert_eq!(back, s);
        }
    }
}
