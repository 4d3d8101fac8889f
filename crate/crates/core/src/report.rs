//! Machine-readable report files and the run manifest.

use std::fmt::Write as _;

use crate::data::{fmt_real, DepthMethod, DepthVector};
use crate::pipeline::{CausalReport, PipelineConfig};
use crate::scalar::Scalar;

/// 64-bit FNV-1a hash of a byte string.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    bytes
        .iter()
        .fold(OFFSET, |h, &b| (h ^ u64::from(b)).wrapping_mul(PRIME))
}

/// Provenance of a run. Everything except `timestamp` determines the outputs.
#[derive(Clone, Debug, PartialEq)]
pub struct RunManifest {
    pub config: Vec<(String, String)>,
    /// `(label, content digest)` per input file.
    pub inputs: Vec<(String, u64)>,
    pub seed: u64,
    pub version: String,
    pub timestamp: Option<String>,
}

impl RunManifest {
    pub fn new(cfg: &PipelineConfig, methods: &[DepthMethod], inputs: Vec<(String, u64)>) -> Self {
        let mut config: Vec<(String, String)> = cfg
            .to_key_values()
            .into_iter()
            .filter(|(k, _)| *k != "depth_method")
            .map(|(k, v)| (k.to_string(), v))
            .collect();
        let methods = methods.iter().map(|m| m.as_str()).collect::<Vec<_>>().join(",");
        config.insert(0, ("methods".into(), methods));
        Self {
            config,
            inputs,
            seed: cfg.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            timestamp: None,
        }
    }

    /// Comment lines shared by every report file.
    pub fn header_lines(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# depthcause {}", self.version);
        let _ = writeln!(
            out,
            "# statistic: rank sum over group C (low-depth units); null mean n_c(N+1)/2"
        );
        let _ = writeln!(out, "# seed: {}", self.seed);
        for (label, digest) in &self.inputs {
            let _ = writeln!(out, "# input {label}: fnv1a64={digest:016x}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(out, "# config {k} = {v}");
        }
        out
    }

    pub fn render(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "version = {}", self.version);
        let _ = writeln!(out, "seed = {}", self.seed);
        if let Some(ts) = &self.timestamp {
            let _ = writeln!(out, "timestamp = {ts}");
        }
        for (label, digest) in &self.inputs {
            let _ = writeln!(out, "input {label} = fnv1a64:{digest:016x}");
        }
        for (k, v) in &self.config {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}

/// Mean and standard deviation of the rank sum per split type (rows) and
/// depth method (columns).
pub fn render_report<T: Scalar>(reports: &[CausalReport<T>], manifest: &RunManifest) -> String {
    let mut out = manifest.header_lines();
    out.push_str("split");
    for r in reports {
        let _ = write!(out, ",{m}_mean,{m}_sd", m = r.method);
    }
    out.push('\n');
    out.push_str("outlyingness");
    for r in reports {
        let _ = write!(out, ",{},{}", fmt_real(r.grand_mean_w), fmt_real(r.sd_of_means));
    }
    out.push('\n');
    out.push_str("random");
    for r in reports {
        let _ = write!(out, ",{},{}", fmt_real(r.baseline_mean_w), fmt_real(r.baseline_sd));
    }
    out.push('\n');
    out
}

/// Per-method statistics on the original data.
pub fn render_summary<T: Scalar>(reports: &[CausalReport<T>], manifest: &RunManifest) -> String {
    let mut out = manifest.header_lines();
    out.push_str("method,n_c,n_f,w_original,null_mean,null_sd,p_value,sup_norm,l2_norm,strength\n");
    for r in reports {
        let o = &r.original;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{}",
            r.method,
            o.n_c,
            o.n_f,
            fmt_real(o.w),
            fmt_real(o.null_mean),
            fmt_real(o.null_sd),
            fmt_real(r.p_value),
            fmt_real(r.median_difference.sup_norm),
            fmt_real(r.median_difference.l2_norm),
            fmt_real(r.strength),
        );
    }
    out
}

/// Depth of every unit under each method, keyed by unit name and sorted by it.
pub fn render_depths<T: Scalar>(table: &[DepthVector<T>]) -> String {
    let mut out = String::from("unit");
    for d in table {
        let _ = write!(out, ",{}", d.method);
    }
    out.push('\n');
    let Some(first) = table.first() else {
        return out;
    };
    let mut order: Vec<usize> = (0..first.len()).collect();
    order.sort_by(|&a, &b| first.units[a].name.cmp(&first.units[b].name));
    for i in order {
        out.push_str(&first.units[i].name);
        for d in table {
            let _ = write!(out, ",{}", fmt_real(d.values[i]));
        }
        out.push('\n');
    }
    out
}

/// Group of every unit (`F` or `C`) per method.
pub fn render_split<T: Scalar>(reports: &[CausalReport<T>]) -> String {
    let mut out = String::from("unit");
    for r in reports {
        let _ = write!(out, ",{}", r.method);
    }
    out.push('\n');
    let Some(first) = reports.first() else {
        return out;
    };
    let labels: Vec<Vec<char>> = reports.iter().map(|r| r.split.labels()).collect();
    for (i, u) in first.units.iter().enumerate() {
        out.push_str(&u.name);
        for l in &labels {
            let _ = write!(out, ",{}", l[i]);
        }
        out.push('\n');
    }
    out
}
