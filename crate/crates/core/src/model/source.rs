use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

/// Identifies a source file. Usually a project-relative path or an editor uri.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FileId(Arc<str>);

impl FileId {
    pub fn new(s: impl AsRef<str>) -> Self {
        FileId(Arc::from(s.as_ref()))
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for FileId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for FileId {
    fn from(s: &str) -> Self {
        FileId::new(s)
    }
}

/// A byte region `[start, end)` of a file.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct SourceRef {
    pub file: FileId,
    pub start: usize,
    pub end: usize,
}

impl SourceRef {
    pub fn new(file: FileId, start: usize, end: usize) -> Self {
        assert!(start <= end, "source region must not be reversed");
        SourceRef { file, start, end }
    }

    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn contains(&self, other: &SourceRef) -> bool {
        self.file == other.file && self.start <= other.start && other.end <= self.end
    }

    pub fn contains_offset(&self, offset: usize) -> bool {
        self.start <= offset && offset < self.end
    }

    /// Smallest region covering both.
    pub fn join(&self, other: &SourceRef) -> SourceRef {
        SourceRef::new(self.file.clone(), self.start.min(other.start), self.end.max(other.end))
    }

    pub fn shifted(&self, delta: isize) -> SourceRef {
        SourceRef::new(
            self.file.clone(),
            (self.start as isize + delta) as usize,
            (self.end as isize + delta) as usize,
        )
    }

    pub fn slice<'a>(&self, text: &'a str) -> &'a str {
        &text[self.start..self.end]
    }
}

impl fmt::Display for SourceRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}#{}-{}", self.file, self.start, self.end)
    }
}

/// Zero-based line/column position; columns count characters.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct LineCol {
    pub line: usize,
    pub column: usize,
}

/// Maps byte offsets of one text to line/column pairs.
#[derive(Clone, Debug)]
pub struct LineIndex {
    line_starts: Vec<usize>,
}

impl LineIndex {
    pub fn new(text: &str) -> Self {
        let mut line_starts = vec![0];
        line_starts.extend(text.match_indices('\n').map(|(i, _)| i + 1));
        LineIndex { line_starts }
    }

    pub fn line_col(&self, text: &str, offset: usize) -> LineCol {
        let line = match self.line_starts.binary_search(&offset) {
            Ok(l) => l,
            Err(l) => l - 1,
        };
        let start = self.line_starts[line];
        let column = text[start..offset.min(text.len())].chars().count();
        LineCol { line, column }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn containment_and_join() {
        let f = FileId::new("a.mmt");
        let outer = SourceRef::new(f.clone(), 2, 10);
        let inner = SourceRef::new(f.clone(), 4, 6);
        assert!(outer.contains(&inner));
        assert!(!inner.contains(&outer));
        assert!(outer.contains(&outer));
        assert_eq!(inner.join(&SourceRef::new(f, 8, 12)).end, 12);
    }

    #[test]
    fn line_columns_count_chars() {
        let text = "ab\n∧c\nd";
        let idx = LineIndex::new(text);
        assert_eq!(idx.line_col(text, 0), LineCol { line: 0, column: 0 });
        assert_eq!(idx.line_col(text, 3), LineCol { line: 1, column: 0 });
        // 'c' sits after the 3-byte '∧'
        assert_eq!(idx.line_col(text, 6), LineCol { line: 1, column: 1 });
        assert_eq!(idx.line_col(text, 8), LineCol { line: 2, column: 0 });
    }
}
