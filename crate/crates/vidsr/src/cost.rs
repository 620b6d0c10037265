//! Exact operation counts per reconstructed frame.
//!
//! A layer producing `D_out` temporal slices of `n_out` features at `H x W`
//! (its output resolution, i.e. after striding) from `n_in` features through
//! `k x k x d` kernels costs
//!
//! ```text
//! H * W * D_out * n_out * ((2 k^2 d - 1) n_in + 2)
//! ```
//!
//! where the trailing `2` covers bias and activation. Sub-pixel
//! rearrangements and bilinear warps move data without arithmetic and are
//! counted as zero. In steady-state operation of a weight-shared network
//! every layer only computes the one temporal slice that is not reusable
//! from the previous frame.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::motion::McArchitecture;
use crate::network::{FusionKind, NetworkSpec};

/// Per-layer and total operation counts for one network at one output
/// resolution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CostReport {
    pub network: String,
    pub hr_height: usize,
    pub hr_width: usize,
    pub upscale: usize,
    pub steady_state: bool,
    pub layers: Vec<LayerCost>,
    pub total_ops: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayerCost {
    pub label: String,
    pub ops: u64,
}

impl CostReport {
    /// Total in units of 10^9 operations, rounded half-up to two decimals as
    /// the tables report them.
    pub fn gops(&self) -> f64 {
        round2(self.total_ops as f64 / 1e9)
    }
}

pub(crate) fn round2(x: f64) -> f64 {
    (x * 100.0 + 0.5).floor() / 100.0
}

/// Operation count of a single layer; `h`/`w` are output extents.
pub fn layer_ops(
    h: usize,
    w: usize,
    d_out: usize,
    n_out: usize,
    k: usize,
    d: usize,
    n_in: usize,
) -> u64 {
    let conv = (2 * k * k * d - 1) as u64 * n_in as u64 + 2;
    (h as u64) * (w as u64) * (d_out as u64) * (n_out as u64) * conv
}

fn check_resolution(hr: (usize, usize), r: usize) -> Result<(usize, usize)> {
    let (h, w) = hr;
    if r == 0 || h % r != 0 || w % r != 0 {
        return Err(Error::invalid(format!(
            "resolution {}x{} is not divisible by the upscale factor {}",
            h, w, r
        )));
    }
    Ok((h / r, w / r))
}

fn spec_costs(spec: &NetworkSpec, lr: (usize, usize), steady: bool) -> Vec<LayerCost> {
    let (h, w) = lr;
    let depths = spec.output_depths();
    let inputs = spec.input_features();
    spec.layers
        .iter()
        .enumerate()
        .map(|(l, ls)| {
            let d_out = if steady { 1 } else { depths[l] };
            LayerCost {
                label: format!(
                    "conv{} k{} d{} {}->{}",
                    l, ls.kernel, ls.temporal_depth, inputs[l], ls.features
                ),
                ops: layer_ops(h, w, d_out, ls.features, ls.kernel, ls.temporal_depth, inputs[l]),
            }
        })
        .collect()
}

/// Per-frame cost of a network processing every temporal slice from scratch.
pub fn network_ops(spec: &NetworkSpec, hr: (usize, usize)) -> Result<CostReport> {
    spec.validate()?;
    let lr = check_resolution(hr, spec.upscale)?;
    let layers = spec_costs(spec, lr, false);
    let total_ops = layers.iter().map(|l| l.ops).sum();
    Ok(CostReport {
        network: format!("{}L-{}{}", spec.layers.len(), spec.fusion, spec.input_depth),
        hr_height: hr.0,
        hr_width: hr.1,
        upscale: spec.upscale,
        steady_state: false,
        layers,
        total_ops,
    })
}

/// Steady-state cost of a weight-shared network: one fresh temporal slice
/// per layer, everything else reused from the previous frame.
pub fn steady_state_ops(spec: &NetworkSpec, hr: (usize, usize)) -> Result<CostReport> {
    spec.validate()?;
    if spec.fusion != FusionKind::SlowShared {
        return Err(Error::config(format!(
            "steady-state accounting applies to weight-shared networks, got {}",
            spec.fusion
        )));
    }
    let lr = check_resolution(hr, spec.upscale)?;
    let layers = spec_costs(spec, lr, true);
    let total_ops = layers.iter().map(|l| l.ops).sum();
    Ok(CostReport {
        network: format!("{}L-{}{}*", spec.layers.len(), spec.fusion, spec.input_depth),
        hr_height: hr.0,
        hr_width: hr.1,
        upscale: spec.upscale,
        steady_state: true,
        layers,
        total_ops,
    })
}

/// Cost of one coarse-plus-fine flow estimation in LR space. Strided layers
/// charge at their (ceil-divided) output resolution; the warp and the
/// sub-pixel stages are free.
pub fn mc_ops(arch: &McArchitecture, hr: (usize, usize), r: usize) -> Result<CostReport> {
    let (lh, lw) = check_resolution(hr, r)?;
    let mut layers = Vec::new();
    for (name, stack) in [("coarse", &arch.coarse), ("fine", &arch.fine)] {
        let (mut h, mut w) = (lh, lw);
        for (i, l) in stack.iter().enumerate() {
            h = h.div_ceil(l.stride);
            w = w.div_ceil(l.stride);
            layers.push(LayerCost {
                label: format!(
                    "{name}{i} k{} s{} {}->{}",
                    l.kernel, l.stride, l.in_features, l.out_features
                ),
                ops: layer_ops(h, w, 1, l.out_features, l.kernel, 1, l.in_features),
            });
        }
    }
    let total_ops = layers.iter().map(|l| l.ops).sum();
    Ok(CostReport {
        network: "MC".into(),
        hr_height: hr.0,
        hr_width: hr.1,
        upscale: r,
        steady_state: false,
        layers,
        total_ops,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Baseline {
    /// Three HR-space layers: 9-5-5 kernels, 64-32-1 features, on the
    /// bicubically upscaled input.
    Srcnn,
    /// Three LR-space layers: 5-3-3 kernels, 64-32-r^2 features, with a
    /// sub-pixel output stage.
    Espcn,
}

impl std::str::FromStr for Baseline {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "srcnn" => Ok(Baseline::Srcnn),
            "espcn" => Ok(Baseline::Espcn),
            other => Err(Error::invalid(format!("unknown baseline '{other}'"))),
        }
    }
}

/// Published reference architectures, modelled at the layer level.
pub fn reference_baseline_ops(name: Baseline, r: usize, hr: (usize, usize)) -> Result<CostReport> {
    let (layers, label): (Vec<LayerCost>, &str) = match name {
        Baseline::Srcnn => {
            // Works at HR resolution; the cost is independent of r.
            let (h, w) = hr;
            let spec = [(9usize, 1usize, 64usize), (5, 64, 32), (5, 32, 1)];
            (
                spec.iter()
                    .enumerate()
                    .map(|(i, &(k, n_in, n_out))| LayerCost {
                        label: format!("conv{i} k{k} {n_in}->{n_out}"),
                        ops: layer_ops(h, w, 1, n_out, k, 1, n_in),
                    })
                    .collect(),
                "SRCNN",
            )
        }
        Baseline::Espcn => {
            let (h, w) = check_resolution(hr, r)?;
            let spec = [(5usize, 1usize, 64usize), (3, 64, 32), (3, 32, r * r)];
            (
                spec.iter()
                    .enumerate()
                    .map(|(i, &(k, n_in, n_out))| LayerCost {
                        label: format!("conv{i} k{k} {n_in}->{n_out}"),
                        ops: layer_ops(h, w, 1, n_out, k, 1, n_in),
                    })
                    .collect(),
                "ESPCN",
            )
        }
    };
    let total_ops = layers.iter().map(|l| l.ops).sum();
    Ok(CostReport {
        network: label.into(),
        hr_height: hr.0,
        hr_width: hr.1,
        upscale: r,
        steady_state: false,
        layers,
        total_ops,
    })
}

pub const HD_1080P: (usize, usize) = (1080, 1920);

/// One row of the architecture-comparison table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TableEntry {
    pub table: &'static str,
    pub scale: usize,
    pub layer_count: usize,
    pub network: String,
    pub total_ops: u64,
    pub gops: f64,
}

fn entry(table: &'static str, scale: usize, layer_count: usize, name: &str, report: &CostReport) -> TableEntry {
    TableEntry {
        table,
        scale,
        layer_count,
        network: name.to_string(),
        total_ops: report.total_ops,
        gops: report.gops(),
    }
}

/// GOps rows of the spatio-temporal architecture comparison (x3, 1080p):
/// SF, E5, S5 and steady-state S5-SW at 7 and 9 layers.
pub fn architecture_table(hr: (usize, usize)) -> Result<Vec<TableEntry>> {
    let mut rows = Vec::new();
    for &layers in &[7usize, 9] {
        let sf = NetworkSpec::build(FusionKind::SingleFrame, layers, 1, 3, None)?;
        rows.push(entry("architectures", 3, layers, "SF", &network_ops(&sf, hr)?));
        let e5 = NetworkSpec::build(FusionKind::Early, layers, 5, 3, None)?;
        rows.push(entry("architectures", 3, layers, "E5", &network_ops(&e5, hr)?));
        let s5 = NetworkSpec::build(FusionKind::Slow, layers, 5, 3, None)?;
        rows.push(entry("architectures", 3, layers, "S5", &network_ops(&s5, hr)?));
        let sw = NetworkSpec::build(FusionKind::SlowShared, layers, 5, 3, None)?;
        rows.push(entry("architectures", 3, layers, "S5-SW", &steady_state_ops(&sw, hr)?));
    }
    Ok(rows)
}

/// GOps rows of the benchmark comparison at x3 and x4: SRCNN, ESPCN, the
/// 5-layer three-frame early-fusion network, and the 9-layer variant with
/// two flow estimations per frame.
pub fn benchmark_table(hr: (usize, usize)) -> Result<Vec<TableEntry>> {
    let mc_arch = McArchitecture::standard();
    let mut rows = Vec::new();
    for &r in &[3usize, 4] {
        rows.push(entry(
            "benchmark",
            r,
            3,
            "SRCNN",
            &reference_baseline_ops(Baseline::Srcnn, r, hr)?,
        ));
        rows.push(entry(
            "benchmark",
            r,
            3,
            "ESPCN",
            &reference_baseline_ops(Baseline::Espcn, r, hr)?,
        ));
        let e3 = NetworkSpec::build(FusionKind::Early, 5, 3, r, None)?;
        rows.push(entry("benchmark", r, 5, "5L-E3", &network_ops(&e3, hr)?));

        let e3_9 = NetworkSpec::build(FusionKind::Early, 9, 3, r, None)?;
        let base = network_ops(&e3_9, hr)?;
        let mc = mc_ops(&mc_arch, hr, r)?;
        let total = base.total_ops + 2 * mc.total_ops;
        rows.push(TableEntry {
            table: "benchmark",
            scale: r,
            layer_count: 9,
            network: "9L-E3-MC".into(),
            total_ops: total,
            gops: round2(total as f64 / 1e9),
        });
        rows.push(entry("benchmark", r, 0, "MC (per estimation)", &mc));
    }
    Ok(rows)
}
