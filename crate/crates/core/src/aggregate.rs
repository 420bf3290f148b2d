//! Aggregate functions, point filters and the partial-aggregate accumulator
//! shared by all join engines.

use crate::error::{Error, Result};
use crate::geometry::{PointDataset, PointRecord};
use crate::scalar::Scalar;
use std::fmt;
use std::str::FromStr;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Aggregate {
    Count,
    Sum(String),
    Avg(String),
}

impl Aggregate {
    /// Attribute the aggregate reads, if any.
    pub fn attr(&self) -> Option<&str> {
        match self {
            Aggregate::Count => None,
            Aggregate::Sum(a) | Aggregate::Avg(a) => Some(a),
        }
    }
}

impl fmt::Display for Aggregate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Aggregate::Count => f.write_str("count"),
            Aggregate::Sum(a) => write!(f, "sum:{a}"),
            Aggregate::Avg(a) => write!(f, "avg:{a}"),
        }
    }
}

impl FromStr for Aggregate {
    type Err = Error;

    /// `count`, `sum:<attr>` or `avg:<attr>`.
    fn from_str(s: &str) -> Result<Self> {
        match s.split_once(':') {
            None if s.eq_ignore_ascii_case("count") => Ok(Aggregate::Count),
            Some((f, a)) if !a.is_empty() && f.eq_ignore_ascii_case("sum") => Ok(Aggregate::Sum(a.into())),
            Some((f, a)) if !a.is_empty() && f.eq_ignore_ascii_case("avg") => Ok(Aggregate::Avg(a.into())),
            _ => Err(Error::Config(format!("unknown aggregate `{s}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum CmpOp {
    Lt,
    Le,
    Gt,
    Ge,
    Eq,
    Ne,
}

impl CmpOp {
    fn as_str(&self) -> &'static str {
        match self {
            CmpOp::Lt => "<",
            CmpOp::Le => "<=",
            CmpOp::Gt => ">",
            CmpOp::Ge => ">=",
            CmpOp::Eq => "==",
            CmpOp::Ne => "!=",
        }
    }
}

/// `attr <op> value` predicate on point attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct AttrFilter {
    pub attr: String,
    pub op: CmpOp,
    pub value: f64,
}

impl AttrFilter {
    pub fn new(attr: impl Into<String>, op: CmpOp, value: f64) -> Self {
        Self { attr: attr.into(), op, value }
    }

    #[inline]
    pub fn test(&self, v: f64) -> bool {
        match self.op {
            CmpOp::Lt => v < self.value,
            CmpOp::Le => v <= self.value,
            CmpOp::Gt => v > self.value,
            CmpOp::Ge => v >= self.value,
            CmpOp::Eq => v == self.value,
            CmpOp::Ne => v != self.value,
        }
    }

    /// Bind to a dataset schema.
    pub fn bind<T: Scalar>(&self, ds: &PointDataset<T>) -> Result<BoundFilter> {
        Ok(BoundFilter { idx: ds.attr_index(&self.attr)?, filter: self.clone() })
    }
}

impl fmt::Display for AttrFilter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}{}{}", self.attr, self.op.as_str(), self.value)
    }
}

impl FromStr for AttrFilter {
    type Err = Error;

    /// `fare>10`, `tip<=2.5`, `kind==3`, ...
    fn from_str(s: &str) -> Result<Self> {
        for (tok, op) in [
            ("<=", CmpOp::Le),
            (">=", CmpOp::Ge),
            ("==", CmpOp::Eq),
            ("!=", CmpOp::Ne),
            ("<", CmpOp::Lt),
            (">", CmpOp::Gt),
            ("=", CmpOp::Eq),
        ] {
            if let Some((a, v)) = s.split_once(tok) {
                let value = v
                    .trim()
                    .parse::<f64>()
                    .map_err(|e| Error::Config(format!("filter `{s}`: {e}")))?;
                let attr = a.trim();
                if attr.is_empty() {
                    break;
                }
                return Ok(Self::new(attr, op, value));
            }
        }
        Err(Error::Config(format!("cannot parse filter `{s}`")))
    }
}

#[derive(Debug, Clone)]
pub struct BoundFilter {
    idx: usize,
    filter: AttrFilter,
}

impl BoundFilter {
    #[inline]
    pub fn matches<T>(&self, r: &PointRecord<T>) -> bool {
        self.filter.test(r.attrs[self.idx])
    }
}

/// Running COUNT and SUM.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Partial {
    pub count: u64,
    pub sum: f64,
}

impl Partial {
    #[inline]
    pub fn add(&mut self, v: f64) {
        self.count += 1;
        self.sum += v;
    }

    #[inline]
    pub fn merge(&mut self, o: &Partial) {
        self.count += o.count;
        self.sum += o.sum;
    }

    /// COUNT and SUM always have a value; AVG of nothing is `None`.
    pub fn finalize(&self, agg: &Aggregate) -> Option<f64> {
        match agg {
            Aggregate::Count => Some(self.count as f64),
            Aggregate::Sum(_) => Some(self.sum),
            Aggregate::Avg(_) if self.count == 0 => None,
            Aggregate::Avg(_) => Some(self.sum / self.count as f64),
        }
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default)]
pub struct WideSum {
    sum: f64,
    comp: f64,
}

impl WideSum {
    #[inline]
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}
