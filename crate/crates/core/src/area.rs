//! Comparator area estimation.
//!
//! The default model costs the constant-propagated gate chain of a bespoke
//! `X <= T` comparator. A measured look-up table can replace it.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quantizer::{QuantizedTree, MAX_PRECISION};

/// Gate-equivalent unit costs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GateWeights {
    pub inv: f64,
    pub and2: f64,
    pub or2: f64,
}

impl Default for GateWeights {
    fn default() -> Self {
        GateWeights {
            inv: 1.0,
            and2: 2.0,
            or2: 2.0,
        }
    }
}

impl GateWeights {
    pub fn validate(&self) -> Result<()> {
        for (name, w) in [("inv", self.inv), ("and2", self.and2), ("or2", self.or2)] {
            if !(w.is_finite() && w > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "gate weight {name} must be positive, got {w}"
                )));
            }
        }
        Ok(())
    }
}

fn check_code(p: u32, t: u64) -> Result<()> {
    if p == 0 || p > MAX_PRECISION {
        return Err(Error::InvalidArgument(format!("precision {p} out of range")));
    }
    if t >= 1u64 << p {
        return Err(Error::ThresholdOutOfRange {
            precision: p,
            threshold: t,
        });
    }
    Ok(())
}

/// Area of a `p`-bit comparator `X <= t` with `t` hardwired.
///
/// The circuit is `NOT GT_p`, where `GT_0 = 0` and bit `i` adds
/// `X_i AND GT_i` when `t_i = 1`, otherwise `X_i OR GT_i`. While `GT` is the
/// constant 0, AND stays constant and OR degenerates to a wire; neither
/// costs anything.
pub fn analytical_area(p: u32, t: u64, w: &GateWeights) -> Result<f64> {
    check_code(p, t)?;
    #[derive(PartialEq)]
    enum Gt {
        Zero,
        Wire,
        Logic,
    }
    let mut gt = Gt::Zero;
    let mut area = 0.0;
    for i in 0..p {
        let bit = (t >> i) & 1 == 1;
        gt = match (gt, bit) {
            (Gt::Zero, true) => Gt::Zero,
            (Gt::Zero, false) => Gt::Wire,
            (_, true) => {
                area += w.and2;
                Gt::Logic
            }
            (_, false) => {
                area += w.or2;
                Gt::Logic
            }
        };
    }
    if gt != Gt::Zero {
        area += w.inv;
    }
    Ok(area)
}

/// Measured areas per `(precision, threshold code)`.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaLut {
    table: BTreeMap<(u32, u64), f64>,
    precisions: BTreeSet<u32>,
    unit: String,
}

impl AreaLut {
    /// Validates completeness: every precision between the smallest and
    /// largest present needs all `2^p` codes.
    pub fn new(entries: impl IntoIterator<Item = ((u32, u64), f64)>, unit: impl Into<String>) -> Result<Self> {
        let mut table = BTreeMap::new();
        for ((p, t), area) in entries {
            check_code(p, t).map_err(|e| Error::Lut(e.to_string()))?;
            if !(area.is_finite() && area >= 0.0) {
                return Err(Error::Lut(format!(
                    "area for precision {p}, threshold {t} must be finite and >= 0, got {area}"
                )));
            }
            if table.insert((p, t), area).is_some() {
                return Err(Error::Lut(format!("duplicate entry for precision {p}, threshold {t}")));
            }
        }
        let (Some(&(lo, _)), Some(&(hi, _))) = (table.keys().next(), table.keys().next_back()) else {
            return Err(Error::Lut("table is empty".into()));
        };
        for p in lo..=hi {
            for t in 0..(1u64 << p) {
                if !table.contains_key(&(p, t)) {
                    return Err(Error::Lut(format!("incomplete: missing precision {p}, threshold {t}")));
                }
            }
        }
        Ok(AreaLut {
            table,
            precisions: (lo..=hi).collect(),
            unit: unit.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn unit(&self) -> &str {
        &self.unit
    }

    pub fn precisions(&self) -> impl Iterator<Item = u32> + '_ {
        self.precisions.iter().copied()
    }

    pub fn get(&self, p: u32, t: u64) -> Result<f64> {
        self.table.get(&(p, t)).copied().ok_or(Error::LutMissing {
            precision: p,
            threshold: t,
        })
    }
}

/// Parses `precision,threshold,area` CSV with an optional leading
/// `# unit: <label>` line.
pub fn parse_lut(text: &str) -> Result<AreaLut> {
    let mut unit = String::from("a.u.");
    let mut lines = text.lines().enumerate().peekable();
    if let Some((_, first)) = lines.peek() {
        if let Some(rest) = first.trim().strip_prefix('#') {
            if let Some(label) = rest.trim().strip_prefix("unit:") {
                unit = label.trim().to_string();
            }
            lines.next();
        }
    }
    match lines.next() {
        Some((_, h)) if h.replace(' ', "").eq_ignore_ascii_case("precision,threshold,area") => {}
        Some((n, h)) => {
            return Err(Error::Lut(format!(
                "line {}: expected header \"precision,threshold,area\", got {h:?}",
                n + 1
            )))
        }
        None => return Err(Error::Lut("missing header".into())),
    }
    let mut entries = Vec::new();
    for (n, line) in lines {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let cells: Vec<&str> = line.split(',').map(str::trim).collect();
        let bad = || {
            Error::Lut(format!(
                "line {}: expected precision,threshold,area, got {line:?}",
                n + 1
            ))
        };
        if cells.len() != 3 {
            return Err(bad());
        }
        let p: u32 = cells[0].parse().map_err(|_| bad())?;
        let t: u64 = cells[1].parse().map_err(|_| bad())?;
        let a: f64 = cells[2].parse().map_err(|_| bad())?;
        entries.push(((p, t), a));
    }
    AreaLut::new(entries, unit)
}

pub fn lut_load(path: impl AsRef<Path>) -> Result<AreaLut> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_lut(&text)
}

/// Either cost model, behind one interface.
#[derive(Debug, Clone, PartialEq)]
pub enum AreaModel {
    Analytical(GateWeights),
    Lut(AreaLut),
}

impl Default for AreaModel {
    fn default() -> Self {
        AreaModel::Analytical(GateWeights::default())
    }
}

impl AreaModel {
    pub fn unit(&self) -> &str {
        match self {
            AreaModel::Analytical(_) => "GE",
            AreaModel::Lut(l) => l.unit(),
        }
    }

    pub fn comparator_area(&self, p: u32, t: u64) -> Result<f64> {
        match self {
            AreaModel::Analytical(w) => analytical_area(p, t, w),
            AreaModel::Lut(l) => l.get(p, t),
        }
    }

    /// Sum of comparator areas; leaf routing logic is not counted.
    pub fn tree_area(&self, qtree: &QuantizedTree) -> Result<f64> {
        qtree.comparators().map(|(p, t)| self.comparator_area(p, t)).sum()
    }
}

pub fn comparator_area(model: &AreaModel, p: u32, t: u64) -> Result<f64> {
    model.comparator_area(p, t)
}

pub fn tree_area(qtree: &QuantizedTree, model: &AreaModel) -> Result<f64> {
    model.tree_area(qtree)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quantizer::QNode;

    const W: GateWeights = GateWeights {
        inv: 1.0,
        and2: 2.0,
        or2: 2.0,
    };

    #[test]
    fn hand_worked_values() {
        assert_eq!(analytical_area(3, 0, &W).unwrap(), 5.0);
        assert_eq!(analytical_area(3, 5, &W).unwrap(), 3.0);
        for p in 1..=12 {
            assert_eq!(analytical_area(p, (1 << p) - 1, &W).unwrap(), 0.0);
        }
        assert!(analytical_area(3, 8, &W).is_err());
    }

    #[test]
    fn exhaustive_sign_and_zero() {
        for p in 1..=10u32 {
            for t in 0..(1u64 << p) {
                let a = analytical_area(p, t, &W).unwrap();
                assert!(a >= 0.0);
                assert_eq!(a == 0.0, t == (1 << p) - 1, "p={p} t={t}");
            }
        }
    }

    #[test]
    fn not_monotone_in_threshold() {
        for p in 3..=10u32 {
            let areas: Vec<f64> = (0..1u64 << p).map(|t| analytical_area(p, t, &W).unwrap()).collect();
            let up = areas.windows(2).any(|w| w[1] > w[0]);
            let down = areas.windows(2).any(|w| w[1] < w[0]);
            assert!(up && down, "p={p}");
        }
    }

    #[test]
    fn profiles_differ_between_precisions() {
        // same fractional thresholds at 6 and 8 bits
        let six: Vec<f64> = (0..64u64).map(|t| analytical_area(6, t, &W).unwrap()).collect();
        let eight: Vec<f64> = (0..64u64).map(|t| analytical_area(8, t * 4, &W).unwrap()).collect();
        assert_ne!(six, eight);
        assert!(six.iter().any(|&a| a != six[0]));
    }

    fn lut_text(skip: Option<(u32, u64)>, bad_area: bool) -> String {
        let mut s = String::from("# unit: mm2\nprecision,threshold,area\n");
        for p in 2..=3u32 {
            for t in 0..(1u64 << p) {
                if Some((p, t)) == skip {
                    continue;
                }
                let a = if bad_area && t == 1 { -1.0 } else { 0.1 * t as f64 };
                s.push_str(&format!("{p},{t},{a}\n"));
            }
        }
        s
    }

    #[test]
    fn lut_parsing() {
        let lut = parse_lut(&lut_text(None, false)).unwrap();
        assert_eq!(lut.len(), 12);
        assert_eq!(lut.unit(), "mm2");
        let err = parse_lut(&lut_text(Some((3, 7)), false)).unwrap_err().to_string();
        assert!(err.contains("precision 3, threshold 7"), "{err}");
        assert!(parse_lut(&lut_text(None, true)).is_err());
        let dup = format!("{}2,0,1.0\n", lut_text(None, false));
        assert!(parse_lut(&dup).unwrap_err().to_string().contains("duplicate"));
    }

    #[test]
    fn lut_lookup_and_coverage() {
        let lut = AreaLut::new((0..256u64).map(|t| ((8, t), if t == 42 { 0.37 } else { 1.0 })), "mm2").unwrap();
        let model = AreaModel::Lut(lut);
        assert_eq!(model.comparator_area(8, 42).unwrap(), 0.37);
        assert!(matches!(model.comparator_area(7, 0), Err(Error::LutMissing { .. })));
    }

    fn tree(codes: &[(u32, u64)]) -> QuantizedTree {
        // chain of comparators, all reading feature 0
        let n = codes.len();
        let mut nodes: Vec<QNode> = codes
            .iter()
            .enumerate()
            .map(|(i, &(precision, code))| QNode::Split {
                feature: 0,
                precision,
                code,
                left: n + i,
                right: if i + 1 < n { i + 1 } else { 2 * n },
            })
            .collect();
        nodes.extend((0..=n).map(|i| QNode::Leaf { class: i % 2 }));
        QuantizedTree::new(nodes, 0, 2, None).unwrap()
    }

    #[test]
    fn tree_area_sums_comparators() {
        let m = AreaModel::default();
        assert_eq!(tree_area(&tree(&[(3, 5)]), &m).unwrap(), 3.0);
        assert_eq!(tree_area(&tree(&[(3, 5), (3, 5)]), &m).unwrap(), 6.0);
        assert_eq!(tree_area(&tree(&[(3, 7), (5, 31), (2, 3)]), &m).unwrap(), 0.0);
        let a = tree_area(&tree(&[(4, 2), (6, 17)]), &m).unwrap();
        let b = tree_area(&tree(&[(8, 100)]), &m).unwrap();
        let joined = tree_area(&tree(&[(4, 2), (6, 17), (8, 100)]), &m).unwrap();
        assert_eq!(joined, a + b);
    }
}
