//! Fully parallel combinational RTL for a quantized tree.
//!
//! Every comparator is a hardwired `<=` against a sized constant. Each leaf
//! gets a one-hot select term (the AND of its path conditions) and the class
//! bus is the OR of the select terms whose class has that bit set. The same
//! expression graph is printed as Verilog and evaluated in software.

use std::fmt::Write as _;

use crate::dataset::Dataset;
use crate::dtree::NodeId;
use crate::error::{Error, Result};
use crate::quantizer::{quantize_feature, QNode, QuantizedTree};

#[derive(Debug, Clone, PartialEq)]
pub enum Expr {
    Const(bool),
    /// `f<feature>[msb:lsb] <= value` on the sampled input bus.
    Compare {
        feature: usize,
        msb: u32,
        lsb: u32,
        value: u64,
    },
    /// Reference to an earlier signal.
    Signal(usize),
    Not(Box<Expr>),
    And(Vec<Expr>),
    Or(Vec<Expr>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    pub name: String,
    pub expr: Expr,
    /// Class selected, for leaf-select signals.
    pub class: Option<usize>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct InputBus {
    pub feature: usize,
    pub width: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Netlist {
    pub inputs: Vec<InputBus>,
    /// Topologically ordered: comparators, then leaf selects.
    pub signals: Vec<Signal>,
    /// One expression per `class_out` bit, LSB first.
    pub outputs: Vec<Expr>,
    pub class_count: usize,
    min_sample_len: usize,
}

impl Netlist {
    pub fn comparator_count(&self) -> usize {
        self.signals
            .iter()
            .filter(|s| matches!(s.expr, Expr::Compare { .. }))
            .count()
    }

    /// Indices of leaf-select signals.
    pub fn select_signals(&self) -> impl Iterator<Item = usize> + '_ {
        self.signals
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class.is_some())
            .map(|(i, _)| i)
    }

    pub fn output_width(&self) -> usize {
        self.outputs.len()
    }
}

/// Bits needed to encode `classes` distinct ids (at least one).
pub fn class_bus_width(classes: usize) -> usize {
    let mut w = 1;
    while (1usize << w) < classes {
        w += 1;
    }
    w
}

pub fn build_netlist(qtree: &QuantizedTree) -> Result<Netlist> {
    let nodes = qtree.nodes();
    let mut inputs: Vec<InputBus> = Vec::new();
    for n in nodes {
        if let QNode::Split { feature, precision, .. } = *n {
            match inputs.iter_mut().find(|b| b.feature == feature) {
                Some(b) => b.width = b.width.max(precision),
                None => inputs.push(InputBus {
                    feature,
                    width: precision,
                }),
            }
        }
    }
    inputs.sort_by_key(|b| b.feature);

    let mut signals = Vec::new();
    let mut cmp_signal = vec![usize::MAX; nodes.len()];
    for (id, n) in nodes.iter().enumerate() {
        if let QNode::Split {
            feature,
            precision,
            code,
            ..
        } = *n
        {
            let width = inputs.iter().find(|b| b.feature == feature).expect("bus").width;
            cmp_signal[id] = signals.len();
            signals.push(Signal {
                name: format!("cmp_{id}"),
                expr: Expr::Compare {
                    feature,
                    msb: width - 1,
                    lsb: width - precision,
                    value: code,
                },
                class: None,
            });
        }
    }

    // path literals for every leaf: LEFT edge => cmp, RIGHT edge => !cmp
    let mut paths: Vec<(NodeId, usize, Vec<Expr>)> = Vec::new();
    let mut stack: Vec<(NodeId, Vec<Expr>)> = vec![(qtree.root(), Vec::new())];
    while let Some((id, path)) = stack.pop() {
        match nodes[id] {
            QNode::Split { left, right, .. } => {
                let c = Expr::Signal(cmp_signal[id]);
                let mut r = path.clone();
                r.push(Expr::Not(Box::new(c.clone())));
                let mut l = path;
                l.push(c);
                stack.push((right, r));
                stack.push((left, l));
            }
            QNode::Leaf { class } => paths.push((id, class, path)),
        }
    }
    paths.sort_by_key(|p| p.0);

    let width = class_bus_width(qtree.class_count());
    if qtree.class_count() > 1usize << width {
        return Err(Error::Internal("class bus too narrow".into()));
    }
    let mut bits: Vec<Vec<Expr>> = vec![Vec::new(); width];
    for (leaf, class, path) in paths {
        let idx = signals.len();
        signals.push(Signal {
            name: format!("sel_{leaf}"),
            expr: if path.is_empty() {
                Expr::Const(true)
            } else {
                Expr::And(path)
            },
            class: Some(class),
        });
        for (b, terms) in bits.iter_mut().enumerate() {
            if (class >> b) & 1 == 1 {
                terms.push(Expr::Signal(idx));
            }
        }
    }
    let outputs = bits
        .into_iter()
        .map(|terms| {
            if terms.is_empty() {
                Expr::Const(false)
            } else {
                Expr::Or(terms)
            }
        })
        .collect();

    Ok(Netlist {
        inputs,
        signals,
        outputs,
        class_count: qtree.class_count(),
        min_sample_len: qtree.min_sample_len(),
    })
}

fn eval_expr(e: &Expr, buses: &[(usize, u64)], values: &[bool]) -> bool {
    match e {
        Expr::Const(b) => *b,
        Expr::Compare {
            feature,
            msb,
            lsb,
            value,
        } => {
            let v = buses.iter().find(|(f, _)| f == feature).expect("bus").1;
            let width = msb - lsb + 1;
            let slice = (v >> lsb) & ((1u64 << width) - 1);
            slice <= *value
        }
        Expr::Signal(i) => values[*i],
        Expr::Not(x) => !eval_expr(x, buses, values),
        Expr::And(xs) => xs.iter().all(|x| eval_expr(x, buses, values)),
        Expr::Or(xs) => xs.iter().any(|x| eval_expr(x, buses, values)),
    }
}

/// `(feature, code)` per input bus.
type BusCodes = Vec<(usize, u64)>;

fn eval_all(net: &Netlist, sample: &[f64]) -> Result<(BusCodes, Vec<bool>)> {
    if sample.len() < net.min_sample_len {
        return Err(Error::DimensionMismatch {
            expected: net.min_sample_len,
            got: sample.len(),
        });
    }
    let buses: BusCodes = net
        .inputs
        .iter()
        .map(|b| (b.feature, quantize_feature(sample[b.feature], b.width)))
        .collect();
    let mut values = Vec::with_capacity(net.signals.len());
    for s in &net.signals {
        let v = eval_expr(&s.expr, &buses, &values);
        values.push(v);
    }
    Ok((buses, values))
}

/// Values of every signal for one sample, in signal order.
pub fn eval_signals(net: &Netlist, sample: &[f64]) -> Result<Vec<bool>> {
    eval_all(net, sample).map(|(_, values)| values)
}

/// Software simulation of the emitted logic: quantize inputs to their bus
/// widths, evaluate the graph, decode `class_out`.
pub fn eval_netlist(net: &Netlist, sample: &[f64]) -> Result<usize> {
    let (buses, values) = eval_all(net, sample)?;
    Ok(net
        .outputs
        .iter()
        .enumerate()
        .filter(|(_, e)| eval_expr(e, &buses, &values))
        .map(|(b, _)| 1usize << b)
        .sum())
}

/// Counts rows where the netlist and the quantized tree disagree.
pub fn count_mismatches(net: &Netlist, qtree: &QuantizedTree, data: &Dataset) -> Result<usize> {
    let mut mismatches = 0;
    for (row, _) in data.rows() {
        if eval_netlist(net, row)? != qtree.predict(row)? {
            mismatches += 1;
        }
    }
    Ok(mismatches)
}

/// Builds a netlist with `build` and refuses to return it unless it agrees
/// with `qtree` on every row of `data`.
pub fn verified_netlist<F>(qtree: &QuantizedTree, data: &Dataset, build: F) -> Result<Netlist>
where
    F: FnOnce(&QuantizedTree) -> Result<Netlist>,
{
    let net = build(qtree)?;
    let mismatches = count_mismatches(&net, qtree, data)?;
    if mismatches > 0 {
        return Err(Error::Equivalence {
            mismatches,
            rows: data.len(),
        });
    }
    Ok(net)
}

pub fn is_identifier(name: &str) -> bool {
    let mut chars = name.chars();
    matches!(chars.next(), Some(c) if c.is_ascii_alphabetic() || c == '_')
        && chars.all(|c| c.is_ascii_alphanumeric() || c == '_' || c == '$')
}

/// Maps arbitrary text onto a legal module identifier.
pub fn sanitize_identifier(raw: &str) -> String {
    let mut s: String = raw
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '_' { c } else { '_' })
        .collect();
    if s.is_empty() || s.starts_with(|c: char| c.is_ascii_digit()) {
        s.insert(0, '_');
    }
    s
}

fn write_expr(out: &mut String, e: &Expr, net: &Netlist) {
    match e {
        Expr::Const(b) => out.push_str(if *b { "1'b1" } else { "1'b0" }),
        Expr::Compare {
            feature,
            msb,
            lsb,
            value,
        } => {
            let width = (msb - lsb + 1) as usize;
            let _ = write!(out, "(f{feature}[{msb}:{lsb}] <= {width}'b{value:0width$b})");
        }
        Expr::Signal(i) => out.push_str(&net.signals[*i].name),
        Expr::Not(x) => {
            out.push('~');
            write_expr(out, x, net);
        }
        Expr::And(xs) | Expr::Or(xs) => {
            let op = if matches!(e, Expr::And(_)) { " & " } else { " | " };
            for (i, x) in xs.iter().enumerate() {
                if i > 0 {
                    out.push_str(op);
                }
                let nested = matches!(x, Expr::And(_) | Expr::Or(_));
                if nested {
                    out.push('(');
                }
                write_expr(out, x, net);
                if nested {
                    out.push(')');
                }
            }
        }
    }
}

/// Verilog text of `net` as module `module_name`. Output is deterministic
/// with LF line endings.
pub fn emit_verilog(net: &Netlist, module_name: &str) -> Result<String> {
    if !is_identifier(module_name) {
        return Err(Error::InvalidArgument(format!(
            "{module_name:?} is not a valid module identifier"
        )));
    }
    let mut out = String::new();
    let _ = writeln!(out, "module {module_name} (");
    for b in &net.inputs {
        let _ = writeln!(out, "    input  wire [{}:0] f{},", b.width - 1, b.feature);
    }
    let _ = writeln!(out, "    output wire [{}:0] class_out", net.output_width() - 1);
    let _ = writeln!(out, ");");
    out.push('\n');
    let _ = writeln!(out, "    // comparators");
    for s in net.signals.iter().filter(|s| s.class.is_none()) {
        let _ = write!(out, "    wire {} = ", s.name);
        write_expr(&mut out, &s.expr, net);
        out.push_str(";\n");
    }
    out.push('\n');
    let _ = writeln!(out, "    // one-hot leaf selects");
    for s in net.signals.iter().filter(|s| s.class.is_some()) {
        let _ = write!(out, "    wire {} = ", s.name);
        write_expr(&mut out, &s.expr, net);
        let _ = writeln!(out, "; // class {}", s.class.expect("select"));
    }
    out.push('\n');
    for (b, e) in net.outputs.iter().enumerate() {
        let _ = write!(out, "    assign class_out[{b}] = ");
        write_expr(&mut out, e, net);
        out.push_str(";\n");
    }
    out.push('\n');
    out.push_str("endmodule\n");
    Ok(out)
}
