//! Central finite-difference check of the analytic gradients.

use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::fgn::grain::{channel_graph, Grain};
use crate::fgn::model::{backward, forward, Dims, Forward, Params, SubModel, GROUP_NAMES};
use crate::rng;

/// Entries of `|A|` below this are treated as sitting on the sgnroot kink.
pub const KINK_EPS: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Group and index of the worst coordinate.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    pub excluded: usize,
}

/// Signs of every non-smooth argument: ReLU inputs, leaky scores and sgnroot inputs.
fn kink_pattern(fw: &Forward) -> Vec<i8> {
    let sign = |v: f64| (v > 0.0) as i8 - (v < 0.0) as i8;
    let mut out = Vec::new();
    for c in &fw.channels {
        out.extend(c.g1.iter().map(|&v| sign(v)));
        out.extend(c.g2.iter().map(|&v| sign(v)));
        out.extend(c.graph.scores.iter().map(|&v| sign(v)));
        out.extend(c.graph.raw.iter().map(|&v| sign(v)));
    }
    out
}

fn near_kink(fw: &Forward) -> bool {
    fw.channels.iter().any(|c| c.graph.adj.iter().any(|a| a.abs() < KINK_EPS))
}

pub fn relative_error(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / (fd.abs() + an.abs()).max(1e-8)
}

/// Compares every parameter's analytic gradient with a central difference of step `h`.
pub fn gradient_check(model: &SubModel, grain: &Grain, h: f64) -> crate::Result<GradCheckReport> {
    let label = grain
        .label
        .ok_or_else(|| crate::Error::Data(format!("grain of node {} has no label", grain.node)))?;
    model.check_grain(grain)?;
    let d: Dims = model.dims;
    let fw = forward(&d, &model.params, grain);
    let an = backward(&d, &model.params, grain, &fw, label, true);
    let attention_kink = near_kink(&fw);

    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        excluded: 0,
    };
    let mut p: Params = model.params.clone();
    for (gi, name) in GROUP_NAMES.iter().enumerate() {
        let len = p.groups()[gi].len();
        for idx in 0..len {
            if Params::is_attention_group(gi) && attention_kink {
                report.excluded += 1;
                continue;
            }
            let orig = p.groups()[gi][idx];
            p.groups_mut()[gi][idx] = orig + h;
            let plus = forward(&d, &p, grain);
            p.groups_mut()[gi][idx] = orig - h;
            let minus = forward(&d, &p, grain);
            p.groups_mut()[gi][idx] = orig;
            if kink_pattern(&plus) != kink_pattern(&minus) {
                report.excluded += 1;
                continue;
            }
            let fd = (plus.loss(label) - minus.loss(label)) / (2.0 * h);
            let err = relative_error(fd, an.groups()[gi][idx]);
            report.checked += 1;
            if report.worst.is_none() || err > report.max_rel_error {
                report.max_rel_error = err;
                report.worst = Some((name.to_string(), idx));
            }
        }
    }
    Ok(report)
}

/// Seeded random (model, grain) pair whose feature graph stays clear of the
/// sgnroot kink: each coordinate has one sign shared by the node and all of
/// its neighbors, with magnitude in [0.2, 1.5).
///
/// With two or more neighbors the attention bias is placed so that channel-0
/// scores fall on both sides of the leaky kink. Otherwise the `w_self`
/// gradient is exactly zero and the difference quotient is pure rounding
/// noise.
pub fn random_instance(seed: u64) -> (SubModel, Grain) {
    let mut r = rng::stream(seed, "gradcheck");
    let dims = Dims {
        feat: r.random_range(2..=6),
        channels: r.random_range(1..=2),
        hidden: r.random_range(2..=5),
        classes: r.random_range(2..=4),
    };
    let width = dims.feat * dims.channels;
    let signs: Vec<f64> = (0..width).map(|_| if r.random::<bool>() { 1.0 } else { -1.0 }).collect();
    let draw = |r: &mut rng::Rng| -> Vec<f64> { signs.iter().map(|s| s * r.random_range(0.2..1.5)).collect() };
    let features = draw(&mut r);
    let n_nbrs = r.random_range(0..=4usize);
    let neighbor_features: Vec<Vec<f64>> = (0..n_nbrs).map(|_| draw(&mut r)).collect();
    let grain = Grain {
        node: 0,
        label: Some(r.random_range(0..dims.classes)),
        features,
        neighbor_ids: (1..=n_nbrs as u64).collect(),
        neighbor_features,
    };
    let mut model = SubModel::new(dims, rng::derive(seed, "gradcheck-model"));
    for b in &mut model.params.b_out {
        *b = r.random_range(-0.5..0.5);
    }
    model.params.attention.bias = r.random_range(-0.5..0.5);
    if n_nbrs >= 2 {
        let cg = channel_graph(&grain, &model.params.attention, dims.channels, 0);
        let mut s: Vec<f64> = cg.scores.iter().map(|v| v - model.params.attention.bias).collect();
        s.sort_by(f64::total_cmp);
        let cut = r.random_range(1..s.len());
        model.params.attention.bias = -0.5 * (s[cut - 1] + s[cut]);
    }
    (model, grain)
}
