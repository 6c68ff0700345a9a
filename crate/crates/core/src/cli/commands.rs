use rand::Rng;

use super::{
    format_float, CsvTable, DatasetName, DesignName, FilterName, KernelName, ModelName, Output, Settings, TaskName,
};
use crate::data_synth::{
    self, hard_instance_model, kl_divergence, rng_for, sample_classification_with, sample_regression_with,
    varshamov_gilbert, ConditionalModel, Design, HardInstance,
};
use crate::dataset_io::{load_cifar10_batches, load_idx_pair, two_class_subset, LabeledImages};
use crate::eigensystems::empirical_eigendecomposition;
use crate::error::{Error, Result};
use crate::kernels::{gram_matrix, KernelKind, KernelSpec};
use crate::par::Execution;
use crate::points::Points;
use crate::risk_eval::{self, RateStudyOptions, RiskMethod};
use crate::smoothness::{repeated_estimate, DEFAULT_TRUNCATION};
use crate::spectral_estimator::{fit, predict, sign, FilterKind};

// offset separating the test-point stream from the training streams seed + r
const TEST_SEED_OFFSET: u64 = 0x9E37_79B9_7F4A_7C15;

fn kernel(s: &Settings) -> Result<KernelSpec> {
    match s.kernel.unwrap_or(KernelName::Min) {
        KernelName::Min => {
            if s.depth.is_some() {
                return Err(Error::Config("--depth only applies to --kernel ntk".into()));
            }
            Ok(KernelSpec::min())
        }
        KernelName::Ntk => KernelSpec::ntk(s.depth.unwrap_or(1)),
    }
}

fn design(s: &Settings) -> Design {
    match s.design.unwrap_or(DesignName::Iid) {
        DesignName::Iid => Design::Iid,
        DesignName::Stratified => Design::Stratified,
    }
}

fn filter(s: &Settings) -> Result<FilterKind> {
    let f = s.filter.unwrap_or(FilterName::GradientFlow);
    if s.tikhonov_m.is_some() && f != FilterName::IteratedTikhonov {
        return Err(Error::Config("--tikhonov-m only applies to --filter iterated-tikhonov".into()));
    }
    Ok(match f {
        FilterName::GradientFlow => FilterKind::GradientFlow,
        FilterName::Ridge => FilterKind::Ridge,
        FilterName::SpectralCutoff => FilterKind::SpectralCutoff,
        FilterName::IteratedTikhonov => FilterKind::iterated_tikhonov(s.tikhonov_m.unwrap_or(2))?,
    })
}

fn positive(name: &str, v: usize) -> Result<usize> {
    if v == 0 {
        return Err(Error::Config(format!("--{name} must be positive")));
    }
    Ok(v)
}

/// Codeword `index` of the greedy codebook for `m >= 8` cells; for fewer
/// cells, the bits of `index` (bit k set means omega_k = -1).
fn omega(m: usize, index: usize, seed: u64) -> Result<(Vec<i8>, usize)> {
    if m >= 8 {
        let book = varshamov_gilbert(m, seed)?;
        let size = book.len();
        let w = book.into_iter().nth(index).ok_or_else(|| {
            Error::InvalidArgument(format!("codeword {index} out of range (codebook has {size})"))
        })?;
        Ok((w, size))
    } else {
        if index >= 1 << m {
            return Err(Error::InvalidArgument(format!("codeword {index} needs more than {m} bits")));
        }
        Ok(((0..m).map(|k| if index >> k & 1 == 1 { -1 } else { 1 }).collect(), 1 << m))
    }
}

fn hard_instance_from(s: &Settings, n_hint: usize) -> Result<(HardInstance, usize)> {
    let d = positive("d", s.d.unwrap_or(1))?;
    let sr = s.sr.unwrap_or(1.0);
    let theta = s.theta.unwrap_or(1.0);
    if !(theta > 0.0) {
        return Err(Error::Config("--theta must be positive".into()));
    }
    let q = match s.q {
        Some(q) => positive("q", q)?,
        None => HardInstance::resolution_for(n_hint, d, sr, theta),
    };
    let m = q
        .checked_pow(d as u32)
        .ok_or_else(|| Error::InvalidArgument("grid has too many cells".into()))?;
    let (w, book) = omega(m, s.codeword.unwrap_or(0), s.seed.unwrap_or(0))?;
    Ok((HardInstance::new(q, d, sr, s.c_psi.unwrap_or(1.0), w)?, book))
}

fn model(s: &Settings, n_hint: usize) -> Result<ConditionalModel> {
    let name = s.model.unwrap_or(ModelName::Cos2pix);
    if s.constant.is_some() && name != ModelName::Constant {
        return Err(Error::Config("--constant only applies to --model constant".into()));
    }
    let hard_keys = s.q.is_some() || s.d.is_some() || s.sr.is_some() || s.c_psi.is_some() || s.codeword.is_some();
    if hard_keys && name != ModelName::HardInstance {
        return Err(Error::Config("--q, --d, --sr, --c-psi and --codeword need --model hard-instance".into()));
    }
    match name {
        ModelName::Cos2pix => Ok(ConditionalModel::cos2pix()),
        ModelName::Constant => {
            let c = s
                .constant
                .ok_or_else(|| Error::Config("--model constant needs --constant".into()))?;
            Ok(ConditionalModel::constant(c))
        }
        ModelName::SphereLinear => ConditionalModel::sphere_linear(s.dim.unwrap_or(3)),
        ModelName::HardInstance => Ok(hard_instance_model(&hard_instance_from(s, n_hint)?.0)),
    }
}

fn default_beta(kernel: &KernelSpec, dim: usize) -> Result<f64> {
    match kernel.kind() {
        KernelKind::Min => Ok(2.0),
        KernelKind::Ntk { .. } if dim >= 2 => Ok(dim as f64 / (dim as f64 - 1.0)),
        _ => Err(Error::Config("--beta is required for this kernel".into())),
    }
}

fn load_dataset(s: &Settings, which: DatasetName) -> Result<(LabeledImages, u8, u8)> {
    // +1 class first: digits 1/7, trouser/sneaker, automobile/horse
    let (pos, neg) = match which {
        DatasetName::Mnist | DatasetName::FashionMnist | DatasetName::Cifar10 => (1, 7),
    };
    let data = match which {
        DatasetName::Mnist | DatasetName::FashionMnist => {
            if s.cifar.is_some() {
                return Err(Error::Config("--cifar only applies to --dataset cifar10".into()));
            }
            let images = s.images.as_ref().ok_or_else(|| Error::Config("--images is required".into()))?;
            let labels = s.labels.as_ref().ok_or_else(|| Error::Config("--labels is required".into()))?;
            let tag = if which == DatasetName::Mnist { "mnist" } else { "fashion-mnist" };
            load_idx_pair(images, labels, tag)?
        }
        DatasetName::Cifar10 => {
            if s.images.is_some() || s.labels.is_some() {
                return Err(Error::Config("--images/--labels do not apply to --dataset cifar10".into()));
            }
            let files = s.cifar.as_ref().ok_or_else(|| Error::Config("--cifar is required".into()))?;
            load_cifar10_batches(files)?
        }
    };
    Ok((data, s.label_pos.unwrap_or(pos), s.label_neg.unwrap_or(neg)))
}

pub(super) fn estimate_smoothness(s: &Settings) -> Result<Output> {
    let kernel = kernel(s)?;
    let n = positive("n", s.n.unwrap_or(5000))?;
    let reps = s.reps.unwrap_or(50);
    let truncation = s.truncation.unwrap_or(DEFAULT_TRUNCATION);
    let seed = s.seed.unwrap_or(0);
    let result;
    let beta;
    if let Some(which) = s.dataset {
        if s.task.is_some() || s.sigma.is_some() || s.design.is_some() {
            return Err(Error::Config("--task, --sigma and --design only apply to synthetic models".into()));
        }
        let (data, pos, neg) = load_dataset(s, which)?;
        beta = match s.beta {
            Some(b) => b,
            None => default_beta(&kernel, data.dim())?,
        };
        result = repeated_estimate(
            |n, seed| two_class_subset(&data, pos, neg, n, seed),
            &kernel,
            n,
            truncation,
            beta,
            reps,
            seed,
            Execution::default(),
        )?;
    } else {
        if s.images.is_some() || s.labels.is_some() || s.cifar.is_some() || s.label_pos.is_some() || s.label_neg.is_some() {
            return Err(Error::Config("dataset flags need --dataset".into()));
        }
        let model = model(s, n)?;
        let design = design(s);
        let task = s.task.unwrap_or(TaskName::Classification);
        let sigma = s.sigma.unwrap_or(0.0);
        if task == TaskName::Classification && s.sigma.is_some() {
            return Err(Error::Config("--sigma only applies to --task regression".into()));
        }
        beta = match s.beta {
            Some(b) => b,
            None => default_beta(&kernel, model.dim())?,
        };
        result = repeated_estimate(
            |n, seed| match task {
                TaskName::Classification => sample_classification_with(&model, n, seed, design),
                TaskName::Regression => sample_regression_with(&model, n, sigma, seed, design),
            },
            &kernel,
            n,
            truncation,
            beta,
            reps,
            seed,
            Execution::default(),
        )?;
    }
    let mut csv = CsvTable::new(["rep", "s_hat"]);
    for (rep, e) in result.estimates.iter().enumerate() {
        csv.push(vec![rep.to_string(), format_float(e.s_hat)]);
    }
    csv.push(vec!["mean".into(), format_float(result.mean)]);
    csv.push(vec!["std".into(), format_float(result.std)]);
    Ok(Output {
        csv,
        summary: vec![format!(
            "s_hat mean {:.4} std {:.4} over {reps} replicates (n = {n}, truncation = {truncation}, beta = {beta})",
            result.mean, result.std
        )],
        failure: None,
    })
}

fn risk_method(s: &Settings, model: &ConditionalModel, seed: u64) -> Option<RiskMethod> {
    match (s.quadrature_points, s.n_test) {
        (Some(points), _) => Some(RiskMethod::Quadrature { points }),
        (None, Some(n_test)) => Some(RiskMethod::MonteCarlo {
            n_test,
            seed: seed.wrapping_add(TEST_SEED_OFFSET),
        }),
        (None, None) if model.dim() > 1 => Some(RiskMethod::MonteCarlo {
            n_test: risk_eval::DEFAULT_MONTE_CARLO_POINTS,
            seed: seed.wrapping_add(TEST_SEED_OFFSET),
        }),
        (None, None) => None,
    }
}

pub(super) fn rate_study(s: &Settings) -> Result<Output> {
    let kernel = kernel(s)?;
    let filter = filter(s)?;
    let grid = s.n_grid.clone().unwrap_or_else(|| vec![256, 512, 1024, 2048, 4096, 8192]);
    let model = model(s, *grid.iter().max().unwrap_or(&1))?;
    let sm = s.s.unwrap_or(0.5);
    let beta = s.beta.unwrap_or(2.0);
    let reps = s.reps.unwrap_or(10);
    let seed = s.seed.unwrap_or(0);
    let options = RateStudyOptions {
        nu_constant: s.nu_constant.unwrap_or(1.0),
        design: design(s),
        method: risk_method(s, &model, seed),
        exec: Execution::default(),
    };
    let r = risk_eval::rate_study(&model, &kernel, filter, &grid, sm, beta, reps, seed, options)?;
    let mut csv = CsvTable::new(["n", "mean_risk", "std", "nu"]);
    for row in &r.rows {
        csv.push(vec![
            row.n.to_string(),
            format_float(row.mean_excess_risk),
            format_float(row.std),
            format_float(row.nu),
        ]);
    }
    csv.push(vec!["fitted_slope".into(), format_float(r.fitted_slope), String::new(), String::new()]);
    csv.push(vec![
        "theoretical_slope".into(),
        format_float(r.theoretical_slope),
        String::new(),
        String::new(),
    ]);
    Ok(Output {
        csv,
        summary: vec![format!(
            "fitted slope {:.4}, theoretical {:.4} ({filter}, {} sizes, {reps} replicates)",
            r.fitted_slope,
            r.theoretical_slope,
            r.rows.len()
        )],
        failure: None,
    })
}

fn coordinate_header(dim: usize) -> Vec<String> {
    if dim == 1 {
        vec!["x".into()]
    } else {
        (0..dim).map(|i| format!("x{i}")).collect()
    }
}

pub(super) fn fit_predict(s: &Settings) -> Result<Output> {
    let kernel = kernel(s)?;
    let filter = filter(s)?;
    let n = positive("n", s.n.unwrap_or(1000))?;
    let model = model(s, n)?;
    let seed = s.seed.unwrap_or(0);
    let nu = match s.nu {
        Some(nu) => {
            if s.s.is_some() || s.beta.is_some() || s.nu_constant.is_some() {
                return Err(Error::Config("--nu replaces --s, --beta and --nu-constant".into()));
            }
            nu
        }
        None => risk_eval::nu_rule(n, s.s.unwrap_or(0.5), s.beta.unwrap_or(2.0), s.nu_constant.unwrap_or(1.0))?,
    };
    let (xs, ys) = sample_classification_with(&model, n, seed, design(s))?;
    let fitted = fit(&kernel, &xs, &ys, filter, nu)?;
    let eval_points = if model.dim() == 1 && s.n_test.is_none() {
        let g = s.grid_points.unwrap_or(101);
        if g < 2 {
            return Err(Error::Config("--grid-points must be at least 2".into()));
        }
        Points::scalars((0..g).map(|i| i as f64 / (g - 1) as f64).collect())
    } else {
        if s.grid_points.is_some() {
            return Err(Error::Config("--grid-points needs a one-dimensional model".into()));
        }
        let mut rng = rng_for(seed.wrapping_add(TEST_SEED_OFFSET));
        model.marginal().sample(&mut rng, s.n_test.unwrap_or(1000), Design::Iid)?
    };
    let mut header = coordinate_header(model.dim());
    header.extend(["f_star".into(), "f_hat".into(), "label".into()]);
    let mut csv = CsvTable::new(header);
    for x in eval_points.iter() {
        let f = predict(&fitted, x)?;
        let mut row: Vec<String> = x.iter().map(|v| format_float(*v)).collect();
        row.extend([format_float(model.f_star(x)), format_float(f), sign(f).to_string()]);
        csv.push(row);
    }
    let method = risk_method(s, &model, seed).unwrap_or_default();
    let risk = risk_eval::excess_risk(&model, |x| predict(&fitted, x).unwrap_or(0.0), method)?;
    let train_err = risk_eval::zero_one_risk(|x| predict(&fitted, x).unwrap_or(0.0), &xs, &ys)?;
    Ok(Output {
        csv,
        summary: vec![format!(
            "{filter} with nu = {nu:.6e} on n = {n}: excess risk {risk:.6e}, training 0-1 error {train_err:.4}"
        )],
        failure: None,
    })
}

pub(super) fn kernel_check(s: &Settings) -> Result<Output> {
    let kernel = kernel(s)?;
    let n = positive("n", s.n.unwrap_or(64))?;
    let seed = s.seed.unwrap_or(0);
    let mut rng = rng_for(seed);
    let xs = match kernel.kind() {
        KernelKind::Min => {
            if s.dim.is_some() {
                return Err(Error::Config("--dim only applies to --kernel ntk".into()));
            }
            Points::scalars((0..n).map(|_| rng.random::<f64>()).collect())
        }
        _ => {
            let dim = s.dim.unwrap_or(3);
            if dim < 2 {
                return Err(Error::Config("--dim must be at least 2".into()));
            }
            data_synth::Marginal::UniformSphere { dim }.sample(&mut rng, n, Design::Iid)?
        }
    };
    let g = gram_matrix(&kernel, &xs)?;
    let scale = g.entries().iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
    let mut checks: Vec<(&str, f64, f64, bool)> = Vec::new();
    checks.push(("symmetry", g.asymmetry() / scale, 1e-12, g.asymmetry() / scale <= 1e-12));
    match kernel.kind() {
        KernelKind::Ntk { depth } => {
            let dev = (0..n).map(|i| (g.get(i, i) - (*depth as f64 + 1.0)).abs()).fold(0.0, f64::max);
            checks.push(("diagonal_deviation", dev, 1e-10, dev <= 1e-10));
        }
        _ => {
            let excess = (0..n).map(|i| g.get(i, i) - kernel.kappa_bound()).fold(f64::NEG_INFINITY, f64::max);
            checks.push(("diagonal_over_kappa", excess, 0.0, excess <= 0.0));
        }
    }
    let spectrum = empirical_eigendecomposition(&g)?;
    let min_eig = spectrum.values().last().copied().unwrap_or(0.0) * n as f64;
    let floor = -1e-8 * n as f64;
    checks.push(("min_eigenvalue", min_eig, floor, min_eig >= floor));
    let mut cs = f64::NEG_INFINITY;
    for i in 0..n {
        for j in 0..n {
            cs = cs.max(g.get(i, j).powi(2) - g.get(i, i) * g.get(j, j));
        }
    }
    checks.push(("cauchy_schwarz_excess", cs, 1e-10, cs <= 1e-10));

    let mut csv = CsvTable::new(["check", "value", "threshold", "passed"]);
    for (name, v, t, ok) in &checks {
        csv.push(vec![name.to_string(), format_float(*v), format_float(*t), ok.to_string()]);
    }
    let failed: Vec<&str> = checks.iter().filter(|c| !c.3).map(|c| c.0).collect();
    let mut summary = vec![format!("{:?} on {n} points", kernel.kind())];
    if let KernelKind::Ntk { depth } = kernel.kind() {
        summary.push(format!("diagonal expected {}", depth + 1));
    }
    summary.push(if failed.is_empty() {
        "all checks passed".into()
    } else {
        format!("failed: {}", failed.join(", "))
    });
    Ok(Output {
        csv,
        summary,
        failure: (!failed.is_empty()).then(|| format!("kernel check failed: {}", failed.join(", "))),
    })
}

pub(super) fn hard_instance(s: &Settings) -> Result<Output> {
    let n = positive("n", s.n.unwrap_or(1000))?;
    let seed = s.seed.unwrap_or(0);
    let (inst, book) = hard_instance_from(s, n)?;
    let model = hard_instance_model(&inst);
    let (xs, ys) = sample_classification_with(&model, n, seed, Design::Iid)?;
    let mut header = coordinate_header(inst.d());
    header.extend(["f_star".into(), "y".into()]);
    let mut csv = CsvTable::new(header);
    for (x, y) in xs.iter().zip(&ys) {
        let mut row: Vec<String> = x.iter().map(|v| format_float(*v)).collect();
        row.extend([format_float(model.f_star(x)), format!("{y}")]);
        csv.push(row);
    }
    let m = inst.cells();
    let nodes = ((2e6 / m as f64).powf(1.0 / inst.d() as f64) as usize).clamp(2, 2001);
    let kl = kl_divergence(&inst, None, nodes)?;
    Ok(Output {
        csv,
        summary: vec![
            format!(
                "q = {}, d = {}, cells = {m}, codebook size = {book}, amplitude C_psi q^-sr = {:.6e}",
                inst.q(),
                inst.d(),
                inst.amplitude()
            ),
            format!("per-sample KL to the zero-signal law = {kl:.6e}; n * KL = {:.6e}", n as f64 * kl),
        ],
        failure: None,
    })
}
