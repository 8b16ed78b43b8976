//! Plain-text tables and CSV exports.

use std::fmt::{self, Write as _};

use rnnt_memcost::arch::ParamReport;
use rnnt_memcost::costmodel::{to_f64, CostReport, Exact, Path};
use rnnt_memcost::memsim::AccessTrace;

/// Column-aligned text table; cells that parse as numbers are right-aligned.
#[derive(Debug, Clone, Default)]
pub struct Table {
    header: Vec<String>,
    rows: Vec<Vec<String>>,
}

impl Table {
    pub fn new<S: Into<String>>(header: impl IntoIterator<Item = S>) -> Self {
        Table { header: header.into_iter().map(Into::into).collect(), rows: Vec::new() }
    }

    pub fn row<S: Into<String>>(&mut self, cells: impl IntoIterator<Item = S>) {
        self.rows.push(cells.into_iter().map(Into::into).collect());
    }
}

fn numeric(s: &str) -> bool {
    let t = s.trim_end_matches(['%', 'x']);
    !t.is_empty() && t.replace(',', "").parse::<f64>().is_ok()
}

impl fmt::Display for Table {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let cols = self.header.len();
        let mut width: Vec<usize> = self.header.iter().map(|h| h.chars().count()).collect();
        for r in &self.rows {
            for (w, c) in width.iter_mut().zip(r) {
                *w = (*w).max(c.chars().count());
            }
        }
        let line = |f: &mut fmt::Formatter<'_>, cells: &[String]| -> fmt::Result {
            let mut out = String::new();
            for (i, c) in cells.iter().enumerate().take(cols) {
                if i > 0 {
                    out.push_str("  ");
                }
                if numeric(c) {
                    write!(out, "{c:>w$}", w = width[i])?;
                } else {
                    write!(out, "{c:<w$}", w = width[i])?;
                }
            }
            writeln!(f, "{}", out.trim_end())
        };
        line(f, &self.header)?;
        let rule: Vec<String> = width.iter().map(|w| "-".repeat(*w)).collect();
        line(f, &rule)?;
        for r in &self.rows {
            line(f, r)?;
        }
        Ok(())
    }
}

/// `1234567` -> `1,234,567`.
pub fn grouped(n: u64) -> String {
    let s = n.to_string();
    let mut out = String::new();
    for (i, ch) in s.chars().enumerate() {
        if i > 0 && (s.len() - i).is_multiple_of(3) {
            out.push(',');
        }
        out.push(ch);
    }
    out
}

/// Integers print grouped, fractions with two decimals.
pub fn bytes(x: &Exact) -> String {
    if x.is_integer() {
        grouped(*x.numer() as u64)
    } else {
        let cents = (to_f64(x) * 100.0).round() as u64;
        format!("{}.{:02}", grouped(cents / 100), cents % 100)
    }
}

pub fn millions(n: usize) -> String {
    format!("{:.3}", n as f64 / 1e6)
}

pub fn params_table(p: &ParamReport) -> String {
    let mut t = Table::new(["block", "W_ih", "W_hh", "W_ch", "bias", "layernorm", "total"]);
    let layers = p.encoder_layers.iter().enumerate().map(|(i, b)| (format!("encoder[{i}]"), b));
    let pred = p.prediction_layers.iter().enumerate().map(|(i, b)| (format!("prediction[{i}]"), b));
    for (name, b) in layers.chain(pred) {
        t.row([
            name,
            grouped(b.w_ih as u64),
            grouped(b.w_hh as u64),
            grouped(b.w_ch as u64),
            grouped(b.bias as u64),
            grouped(b.layernorm as u64),
            grouped(b.total() as u64),
        ]);
    }
    let mut s = t.to_string();
    let mut sum = Table::new(["part", "params", "M"]);
    for (name, n) in [
        ("encoder", p.encoder),
        ("prediction", p.prediction),
        ("embedding", p.embedding),
        ("joint", p.joint_total),
        ("network", p.total),
    ] {
        sum.row([name.to_string(), grouped(n as u64), millions(n)]);
    }
    s.push('\n');
    s.push_str(&sum.to_string());
    s
}

pub fn layer_table(r: &CostReport) -> String {
    let mut t = Table::new(["layer", "kind", "rate", "working_set", "pinned", "input B/frame", "recurrent B/frame", "total B/frame"]);
    for l in &r.encoder.layers {
        t.row([
            l.index.to_string(),
            l.kind.name().to_string(),
            format!("1/{}", l.rate.divisor),
            grouped(l.working_set),
            if l.pinned { "yes" } else { "no" }.to_string(),
            bytes(&l.input_path),
            bytes(&l.recurrent_path),
            bytes(&l.bytes_per_frame()),
        ]);
    }
    t.to_string()
}

fn path_blocks(r: &CostReport, layer: usize, path: Path) -> (String, Exact) {
    let l = &r.encoder.layers[layer];
    let blocks: Vec<_> = l.blocks.iter().filter(|b| b.path == path).collect();
    let names: Vec<&str> = blocks.iter().map(|b| b.id.kind.name()).collect();
    (names.join("+"), blocks.iter().map(|b| b.bytes_per_unit).sum())
}

/// One row per (layer, path): `layer,kind,rate,block,bytes_per_frame,pinned`.
/// The final `decoder` row is bytes per emitted symbol.
pub fn cost_csv(r: &CostReport) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["layer", "kind", "rate", "block", "bytes_per_frame", "pinned"]).expect("in-memory write");
    for l in &r.encoder.layers {
        for path in [Path::Input, Path::Recurrent] {
            let (names, b) = path_blocks(r, l.index, path);
            if names.is_empty() {
                continue;
            }
            let pinned = path == Path::Recurrent && l.pinned;
            w.write_record([
                l.index.to_string(),
                l.kind.name().to_string(),
                format!("1/{}", l.rate.divisor),
                names,
                to_f64(&b).to_string(),
                pinned.to_string(),
            ])
            .expect("in-memory write");
        }
    }
    w.write_record([
        "decoder".to_string(),
        "-".to_string(),
        "symbol".to_string(),
        "decoder".to_string(),
        to_f64(&r.decoder.bytes_per_symbol).to_string(),
        r.decoder.resident.to_string(),
    ])
    .expect("in-memory write");
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}

/// Trace log as `batch,block,fetches,bytes,pinned`.
pub fn trace_csv(t: &AccessTrace) -> String {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["batch", "block", "fetches", "bytes", "pinned"]).expect("in-memory write");
    for e in &t.log {
        w.write_record([
            e.batch.to_string(),
            e.block.to_string(),
            e.fetches.to_string(),
            e.bytes.to_string(),
            e.pinned.to_string(),
        ])
        .expect("in-memory write");
    }
    String::from_utf8(w.into_inner().expect("in-memory flush")).expect("ascii csv")
}
