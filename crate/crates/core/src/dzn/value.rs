use std::fmt;

use indexmap::IndexMap;

/// Inclusive index range of one array dimension. `hi < lo` denotes an empty
/// range.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct IndexRange {
    pub lo: i64,
    pub hi: i64,
}

impl IndexRange {
    pub fn new(lo: i64, hi: i64) -> Self {
        Self { lo, hi }
    }

    /// The default `1..k` range used when a data file does not declare one.
    pub fn one_based(extent: usize) -> Self {
        Self {
            lo: 1,
            hi: extent as i64,
        }
    }

    pub fn extent(&self) -> usize {
        if self.hi < self.lo {
            0
        } else {
            (self.hi - self.lo + 1) as usize
        }
    }

    pub fn is_one_based(&self) -> bool {
        self.lo == 1
    }
}

impl fmt::Display for IndexRange {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}..{}", self.lo, self.hi)
    }
}

/// Set of integers, kept sorted and free of duplicates.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default)]
pub struct IntSet(Vec<i64>);

impl IntSet {
    pub fn from_members(members: impl IntoIterator<Item = i64>) -> Self {
        let mut v: Vec<i64> = members.into_iter().collect();
        v.sort_unstable();
        v.dedup();
        Self(v)
    }

    pub fn from_range(lo: i64, hi: i64) -> Self {
        if hi < lo {
            Self::default()
        } else {
            Self((lo..=hi).collect())
        }
    }

    pub fn members(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn contains(&self, x: i64) -> bool {
        self.0.binary_search(&x).is_ok()
    }

    /// `Some((lo, hi))` when the members form one contiguous run.
    pub fn as_range(&self) -> Option<(i64, i64)> {
        let (first, last) = (*self.0.first()?, *self.0.last()?);
        (last - first + 1 == self.0.len() as i64).then_some((first, last))
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ShapeError {
    #[error("array has {found} elements but its index ranges hold {expected}")]
    ElementCount { expected: usize, found: usize },
    #[error("arrays must have at least one dimension")]
    NoDimensions,
    #[error("array elements must be scalars or integer sets")]
    NestedArray,
}

/// Multi-dimensional array stored row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct Array {
    dims: Vec<IndexRange>,
    elements: Vec<Value>,
}

impl Array {
    pub fn new(dims: Vec<IndexRange>, elements: Vec<Value>) -> Result<Self, ShapeError> {
        if dims.is_empty() {
            return Err(ShapeError::NoDimensions);
        }
        let expected: usize = dims.iter().map(IndexRange::extent).product();
        if expected != elements.len() {
            return Err(ShapeError::ElementCount {
                expected,
                found: elements.len(),
            });
        }
        if elements.iter().any(|e| matches!(e, Value::Array(_))) {
            return Err(ShapeError::NestedArray);
        }
        Ok(Self { dims, elements })
    }

    /// One-dimensional array indexed from 1.
    pub fn from_elements(elements: Vec<Value>) -> Result<Self, ShapeError> {
        Self::new(vec![IndexRange::one_based(elements.len())], elements)
    }

    pub fn dims(&self) -> &[IndexRange] {
        &self.dims
    }

    pub fn elements(&self) -> &[Value] {
        &self.elements
    }

    pub fn extents(&self) -> Vec<usize> {
        self.dims.iter().map(IndexRange::extent).collect()
    }

    pub fn into_parts(self) -> (Vec<IndexRange>, Vec<Value>) {
        (self.dims, self.elements)
    }
}

/// A value in the supported DZN subset.
#[derive(Debug, Clone, PartialEq)]
pub enum Value {
    Int(i64),
    Float(f64),
    Bool(bool),
    Str(String),
    Array(Array),
    Set(IntSet),
}

impl Value {
    /// Number of array dimensions; 0 for scalars and sets.
    pub fn dimensions(&self) -> usize {
        match self {
            Value::Array(a) => a.dims().len(),
            _ => 0,
        }
    }

    pub fn as_i64(&self) -> Option<i64> {
        match self {
            Value::Int(i) => Some(*i),
            _ => None,
        }
    }

    /// Numeric view used for objective values.
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            Value::Int(i) => Some(*i as f64),
            Value::Float(x) => Some(*x),
            _ => None,
        }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            Value::Int(_) => "int",
            Value::Float(_) => "float",
            Value::Bool(_) => "bool",
            Value::Str(_) => "string",
            Value::Array(_) => "array",
            Value::Set(_) => "set of int",
        }
    }
}

impl From<i64> for Value {
    fn from(v: i64) -> Self {
        Value::Int(v)
    }
}

impl From<f64> for Value {
    fn from(v: f64) -> Self {
        Value::Float(v)
    }
}

impl From<bool> for Value {
    fn from(v: bool) -> Self {
        Value::Bool(v)
    }
}

impl From<&str> for Value {
    fn from(v: &str) -> Self {
        Value::Str(v.to_string())
    }
}

impl From<IntSet> for Value {
    fn from(v: IntSet) -> Self {
        Value::Set(v)
    }
}

impl From<Array> for Value {
    fn from(v: Array) -> Self {
        Value::Array(v)
    }
}

/// Ordered symbol → value environment parsed from a data file.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Bindings(IndexMap<String, Value>);

impl Bindings {
    pub fn new() -> Self {
        Self::default()
    }

    /// Inserts a binding, returning the previous value for the symbol.
    pub fn insert(&mut self, symbol: impl Into<String>, value: Value) -> Option<Value> {
        self.0.insert(symbol.into(), value)
    }

    pub fn get(&self, symbol: &str) -> Option<&Value> {
        self.0.get(symbol)
    }

    pub fn contains(&self, symbol: &str) -> bool {
        self.0.contains_key(symbol)
    }

    pub fn remove(&mut self, symbol: &str) -> Option<Value> {
        self.0.shift_remove(symbol)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Value)> {
        self.0.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.0.keys().map(String::as_str)
    }

    /// Keeps only the bindings whose symbol satisfies `keep`.
    pub fn retain(&mut self, mut keep: impl FnMut(&str) -> bool) {
        self.0.retain(|k, _| keep(k));
    }
}

impl FromIterator<(String, Value)> for Bindings {
    fn from_iter<T: IntoIterator<Item = (String, Value)>>(iter: T) -> Self {
        Self(iter.into_iter().collect())
    }
}

impl IntoIterator for Bindings {
    type Item = (String, Value);
    type IntoIter = indexmap::map::IntoIter<String, Value>;

    fn into_iter(self) -> Self::IntoIter {
        self.0.into_iter()
    }
}
