use clap::{Args, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;
use toric_spectra::asymptotics::{
    self, extract_expansion, fit_line, hessian_det, laplace_normalization, model_p1, pinched_average,
    pointwise_norm_asymptotic, Window,
};
use toric_spectra::euler_maclaurin::{em_error_report, riemann_sum_exact, tau_coefficients};
use toric_spectra::kernel::{argmax_phi, phi, KernelContext, KernelDomain, DEFAULT_KERNEL_TOL};
use toric_spectra::measures::{asymptotic_pairing, AsymptoticPairingOptions, SpectralMeasure};
use toric_spectra::poly::Polynomial;
use toric_spectra::polytope::DelzantPolytope;

use crate::output::{Cell, Report};
use crate::{load_polytope, CliError, CliResult, Command, Common};

/// A comma-separated real vector such as `0.5,0.25`.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(transparent)]
pub struct Point(pub Vec<f64>);

fn parse_point(s: &str) -> Result<Point, String> {
    s.split(',')
        .map(|t| t.trim().parse::<f64>().map_err(|_| format!("{t:?} is not a number")))
        .collect::<Result<Vec<_>, _>>()
        .map(Point)
}

fn parse_poly(s: &str) -> Result<Polynomial, String> {
    Polynomial::parse_spec(s).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Model {
    /// The positive orthant with facets `y_j = 0`.
    Orthant,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum WindowArg {
    Bump,
    Constant,
}

impl From<WindowArg> for Window {
    fn from(w: WindowArg) -> Self {
        match w {
            WindowArg::Bump => Window::Bump,
            WindowArg::Constant => Window::Constant,
        }
    }
}

/// `--N` or `--N-grid`.
#[derive(Clone, Debug, Args, Serialize)]
pub struct Levels {
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub level: Option<u32>,
    #[arg(long = "N-grid", value_delimiter = ',')]
    #[serde(rename = "N_grid")]
    pub n_grid: Option<Vec<u32>>,
}

impl Levels {
    fn resolve(&self) -> CliResult<Vec<u32>> {
        let levels = match (&self.level, &self.n_grid) {
            (Some(n), None) => vec![*n],
            (None, Some(g)) => g.clone(),
            (Some(_), Some(_)) => return Err(CliError::usage("give either --N or --N-grid, not both")),
            (None, None) => return Err(CliError::usage("--N or --N-grid is required")),
        };
        if levels.is_empty() || levels.contains(&0) {
            return Err(CliError::usage("levels must be positive"));
        }
        Ok(levels)
    }
}

#[derive(Debug, Args, Serialize)]
pub struct Validate {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
}

#[derive(Debug, Args, Serialize)]
pub struct Lattice {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub level: u32,
    /// Also report lattice distances of this point.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Option<Point>,
    /// Also report the facet-shifted polytope for this offset vector.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub shift: Option<Point>,
}

#[derive(Debug, Args, Serialize)]
pub struct KernelEval {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub level: u32,
    /// Base point; defaults to k/N when --k is given.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Option<Point>,
    /// Evaluation point, repeatable.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub y: Vec<Point>,
    /// Lattice weight for section norms.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k: Option<Vec<i64>>,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
}

#[derive(Debug, Args, Serialize)]
pub struct Transform {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub levels: Levels,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Point,
    #[arg(long, value_parser = parse_poly)]
    pub f: Polynomial,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
}

#[derive(Debug, Args, Serialize)]
pub struct Expand {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N-grid", value_delimiter = ',', default_values_t = asymptotics::DEFAULT_N_GRID)]
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<u32>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Point,
    #[arg(long, value_parser = parse_poly)]
    pub f: Polynomial,
    /// Number of fitted 1/N coefficients beyond a_0.
    #[arg(long, default_value_t = asymptotics::DEFAULT_ORDER)]
    pub order: usize,
    #[arg(long, value_enum)]
    pub model: Option<Model>,
}

#[derive(Debug, Args, Serialize)]
pub struct Density {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub level: u32,
    /// Grid points per axis over the bounding box.
    #[arg(long, default_value_t = 101)]
    pub grid: usize,
}

#[derive(Debug, Args, Serialize)]
pub struct Pair {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub levels: Levels,
    #[arg(long, value_parser = parse_poly, default_value = "poly:1")]
    pub f: Polynomial,
    /// Also integrate f against the density directly.
    #[arg(long)]
    pub by_density: bool,
    /// Asymptotic series of N^-n times the pairing up to this order (at most 2).
    #[arg(long)]
    pub order: Option<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct Moments {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub level: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k: Vec<i64>,
    #[arg(long, value_delimiter = ',', default_values_t = [2u32, 3])]
    pub m: Vec<u32>,
    /// Also average f against the normalized section norm.
    #[arg(long, value_parser = parse_poly)]
    pub f: Option<Polynomial>,
}

#[derive(Debug, Args, Serialize)]
pub struct Distribution {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N")]
    #[serde(rename = "N")]
    pub level: u32,
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub k: Vec<i64>,
    /// Number of thresholds evenly spaced up to the peak norm.
    #[arg(long, default_value_t = 11)]
    pub grid: usize,
    /// Explicit thresholds; overrides --grid.
    #[arg(long, value_delimiter = ',')]
    pub t: Option<Vec<f64>>,
}

#[derive(Debug, Args, Serialize)]
pub struct EmCheck {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[command(flatten)]
    #[serde(flatten)]
    pub levels: Levels,
    #[arg(long, value_parser = parse_poly)]
    pub f: Polynomial,
    /// Truncation orders of the operator.
    #[arg(long, value_delimiter = ',', default_values_t = [toric_spectra::euler_maclaurin::DEFAULT_ORDER])]
    pub order: Vec<usize>,
}

#[derive(Debug, Args, Serialize)]
pub struct Localize {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N-grid", value_delimiter = ',', default_values_t = (20..=120).step_by(10).collect::<Vec<u32>>())]
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<u32>,
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Point,
    #[arg(long, value_parser = parse_poly, default_value = "poly:1")]
    pub f: Polynomial,
    /// Center of the bump cutoff multiplying f in the numerator.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub y: Point,
    /// Half-width of the bump cutoff.
    #[arg(long)]
    pub delta: f64,
}

#[derive(Debug, Args, Serialize)]
pub struct Pinch {
    #[command(flatten)]
    #[serde(flatten)]
    pub common: Common,
    #[arg(long = "N-grid", value_delimiter = ',', default_values_t = [50u32, 100, 200, 400])]
    #[serde(rename = "N_grid")]
    pub n_grid: Vec<u32>,
    /// k/N; k = N x must be integral at every level.
    #[arg(long, value_parser = parse_point, allow_hyphen_values = true)]
    pub x: Point,
    #[arg(long, default_value_t = 0.25)]
    pub delta: f64,
    #[arg(long, value_enum, default_value = "bump")]
    pub window: WindowArg,
}

type Dispatched = (Report, Option<String>);

pub(crate) fn dispatch(command: &Command) -> CliResult<Dispatched> {
    match command {
        Command::Validate(c) => validate(c),
        Command::Lattice(c) => lattice(c),
        Command::KernelEval(c) => kernel_eval(c),
        Command::Transform(c) => transform(c),
        Command::Expand(c) => expand(c),
        Command::Density(c) => density(c),
        Command::Pair(c) => pair(c),
        Command::Moments(c) => moments(c),
        Command::Distribution(c) => distribution(c),
        Command::EmCheck(c) => em_check(c),
        Command::Localize(c) => localize(c),
        Command::Pinch(c) => pinch(c),
    }
}

fn domain_for(common: &Common, model: Option<Model>, dim: usize) -> CliResult<(KernelDomain, Option<String>)> {
    match model {
        Some(Model::Orthant) => {
            if common.polytope.is_some() {
                return Err(CliError::usage("--model orthant replaces --polytope"));
            }
            Ok((KernelDomain::orthant(dim), None))
        }
        None => {
            let (p, hash) = load_polytope(common)?;
            Ok((p.into(), Some(hash)))
        }
    }
}

fn check_dim(what: &str, found: usize, dim: usize) -> CliResult<()> {
    if found != dim {
        return Err(CliError::validation(format!("{what} has {found} coordinates, expected {dim}")));
    }
    Ok(())
}

fn check_poly(f: &Polynomial, dim: usize) -> CliResult<()> {
    if f.arity() > dim {
        return Err(CliError::validation(format!(
            "polynomial uses {} variables on a {dim}-dimensional polytope",
            f.arity()
        )));
    }
    Ok(())
}

fn context(domain: &KernelDomain, level: u32, tol: Option<f64>) -> KernelContext {
    KernelContext::new(domain.clone(), level).with_tol(tol.unwrap_or(DEFAULT_KERNEL_TOL))
}

fn coordinate_columns(prefix: &str, dim: usize) -> Vec<String> {
    (0..dim).map(|j| format!("{prefix}{j}")).collect()
}

fn floats(v: &[f64]) -> Vec<Cell> {
    v.iter().map(|&x| Cell::Float(x)).collect()
}

fn validate(c: &Validate) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    let mut r = Report::default();
    r.fact("delzant", true);
    r.fact("vertices", p.vertices().len());
    r.fact("facets", p.num_facets());
    r.fact("dim", p.dim());
    r.fact("faces", p.faces().len());
    r.fact("volume", p.volume_exact().to_string());
    let dets = (0..p.vertices().len())
        .map(|i| p.vertex_chart_at(i).map(|ch| ch.determinant().to_string()))
        .collect::<Result<Vec<_>, _>>()
        .map_err(|e| CliError::validation(e.to_string()))?;
    r.fact("chart determinants", dets.join(" "));
    Ok((r, Some(hash)))
}

fn lattice(c: &Lattice) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    let dim = p.dim();
    let mut columns = coordinate_columns("k", dim);
    columns.extend((0..p.num_facets()).map(|i| format!("l{i}")));
    let mut r = Report::with_columns(columns);
    let points = p.lattice_points(c.level);
    r.fact("lattice points", points.len());
    for k in &points {
        let mut row: Vec<Cell> = k.iter().map(|&v| Cell::Int(v)).collect();
        row.extend(p.scaled_lattice_distances(k, c.level).into_iter().map(Cell::Int));
        r.row(row);
    }
    if let Some(x) = &c.x {
        check_dim("--x", x.0.len(), dim)?;
        let d = p.lattice_distances(&x.0)?;
        r.fact("inside", d.is_inside());
        r.fact("lattice distances", d.values.clone());
    }
    if let Some(h) = &c.shift {
        check_dim("--shift", h.0.len(), p.num_facets())?;
        let s = p.shift(&h.0).map_err(|e| CliError::validation(e.to_string()))?;
        r.fact("shifted volume", s.region().volume());
        r.fact(
            "shifted vertices",
            s.region().vertices().iter().flatten().copied().collect::<Vec<f64>>(),
        );
    }
    Ok((r, Some(hash)))
}

fn kernel_eval(c: &KernelEval) -> CliResult<Dispatched> {
    let dim_hint = c
        .x
        .as_ref()
        .map(|x| x.0.len())
        .or(c.k.as_ref().map(Vec::len))
        .ok_or_else(|| CliError::usage("--x or --k is required"))?;
    let (domain, hash) = domain_for(&c.common, c.model, dim_hint)?;
    let dim = domain.dim();
    let ctx = context(&domain, c.level, c.common.tol);
    let x = match (&c.x, &c.k) {
        (Some(x), _) => x.0.clone(),
        (None, Some(k)) => ctx.lattice_point(k)?,
        (None, None) => unreachable!("checked above"),
    };
    check_dim("--x", x.len(), dim)?;
    if let Some(k) = &c.k {
        check_dim("--k", k.len(), dim)?;
    }
    let at_x = phi(&domain, &x, &x)?;
    let argmax = argmax_phi(&domain, &x)?;
    let log_c = ctx.log_c(&x)?;
    let mut r = Report::default();
    r.fact("peak phase", at_x.value);
    r.fact("argmax", argmax.point.clone());
    r.fact("argmax iterations", argmax.iterations);
    r.fact("log c", log_c);
    r.fact("laplace log c", laplace_normalization(&domain, c.level, &x).ok());
    let mut columns = coordinate_columns("y", dim);
    columns.extend(["phase", "kernel"].map(String::from));
    if c.k.is_some() {
        columns.extend(["section_norm", "asymptotic_log_norm"].map(String::from));
    }
    r.columns = columns;
    for y in &c.y {
        check_dim("--y", y.0.len(), dim)?;
        let mut row = floats(&y.0);
        row.push(phi(&domain, &x, &y.0)?.value.into());
        row.push(ctx.kernel_eval(&x, &y.0)?.into());
        if let Some(k) = &c.k {
            let xk = ctx.lattice_point(k)?;
            row.push(ctx.section_norm(k, &y.0)?.into());
            row.push(pointwise_norm_asymptotic(&domain, c.level, &xk, &y.0).ok().into());
        }
        r.row(row);
    }
    Ok((r, hash))
}

fn transform(c: &Transform) -> CliResult<Dispatched> {
    let levels = c.levels.resolve()?;
    let (domain, hash) = domain_for(&c.common, c.model, c.x.0.len())?;
    check_dim("--x", c.x.0.len(), domain.dim())?;
    check_poly(&c.f, domain.dim())?;
    let rows = levels
        .par_iter()
        .map(|&n| {
            let ctx = context(&domain, n, c.common.tol);
            Ok((n, ctx.transform(|y| c.f.eval(y), &c.x.0)?, ctx.log_c(&c.x.0)?))
        })
        .collect::<toric_spectra::error::Result<Vec<_>>>()?;
    let mut r = Report::with_columns(["N", "transform", "log_c"]);
    r.fact("f(x)", c.f.eval(&c.x.0));
    for (n, v, lc) in rows {
        r.row(vec![n.into(), v.into(), lc.into()]);
    }
    Ok((r, hash))
}

fn expand(c: &Expand) -> CliResult<Dispatched> {
    let (domain, hash) = domain_for(&c.common, c.model, c.x.0.len())?;
    check_dim("--x", c.x.0.len(), domain.dim())?;
    check_poly(&c.f, domain.dim())?;
    let tol = c.common.tol.unwrap_or(DEFAULT_KERNEL_TOL);
    let rep = extract_expansion(&domain, |y| c.f.eval(y), &c.x.0, &c.n_grid, c.order, tol)?;
    let fx = c.f.eval(&c.x.0);
    let mut r = Report::with_columns(["N", "transform", "remainder"]);
    r.fact("coefficients", rep.coefficients.clone());
    r.fact("f(x)", fx);
    r.fact("a0 - f(x)", rep.coefficients[0] - fx);
    r.fact("orthant model P1", model_p1(&c.f, &c.x.0));
    r.fact("hessian det", hessian_det(&domain, &c.x.0).ok().map(|h| h.determinant));
    r.fact("remainder decay", rep.tail_order);
    r.fact("residual norm", rep.residual_norm);
    r.fact("condition", rep.condition);
    let (a0, a1) = (rep.coefficients[0], rep.coefficients.get(1).copied().unwrap_or(0.0));
    for (&n, &v) in rep.n_grid.iter().zip(&rep.values) {
        r.row(vec![n.into(), v.into(), (v - a0 - a1 / f64::from(n)).into()]);
    }
    Ok((r, hash))
}

/// Tensor grid over the bounding box, keeping points inside the polytope.
fn grid_points(p: &DelzantPolytope, per_axis: usize) -> Vec<Vec<f64>> {
    let (lo, hi) = p.region().bounding_box();
    let dim = p.dim();
    let axis = |j: usize, i: usize| {
        if per_axis == 1 {
            0.5 * (lo[j] + hi[j])
        } else {
            lo[j] + (hi[j] - lo[j]) * i as f64 / (per_axis - 1) as f64
        }
    };
    let total = per_axis.pow(dim as u32);
    (0..total)
        .map(|mut idx| {
            let mut y = vec![0.0; dim];
            for j in (0..dim).rev() {
                y[j] = axis(j, idx % per_axis);
                idx /= per_axis;
            }
            y
        })
        .filter(|y| p.contains(y))
        .collect()
}

fn density(c: &Density) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    if c.grid == 0 {
        return Err(CliError::usage("--grid must be positive"));
    }
    let dim = p.dim();
    let measure = SpectralMeasure::from_context(std::sync::Arc::new(
        KernelContext::new(p.clone(), c.level).with_tol(c.common.tol.unwrap_or(DEFAULT_KERNEL_TOL)),
    ))?;
    let ys = grid_points(&p, c.grid);
    let values = ys
        .par_iter()
        .map(|y| measure.spectral_density(y))
        .collect::<toric_spectra::error::Result<Vec<f64>>>()?;
    let count = measure.lattice_points().len() as f64;
    let volume = p.region().volume();
    let flat = count / volume;
    let deviation = values.iter().fold(0.0f64, |m, v| m.max((v / flat - 1.0).abs()));
    let mut columns = coordinate_columns("y", dim);
    columns.push("density".into());
    let mut r = Report::with_columns(columns);
    r.fact("lattice points", measure.lattice_points().len());
    r.fact("lattice points / volume", flat);
    r.fact("max relative deviation", deviation);
    for (y, v) in ys.iter().zip(values) {
        let mut row = floats(y);
        row.push(v.into());
        r.row(row);
    }
    Ok((r, Some(hash)))
}

fn pair(c: &Pair) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    check_poly(&c.f, p.dim())?;
    let f = |y: &[f64]| c.f.eval(y);
    if let Some(order) = c.order {
        let mut opts = AsymptoticPairingOptions::default();
        if let Some(tol) = c.common.tol {
            opts.tol = tol;
        }
        let series = asymptotic_pairing(&p, f, order, &opts)?;
        let mut r = Report::with_columns(["j", "coefficient"]);
        for (j, i, v) in &series.contributions {
            r.fact(&format!("T{j} P{i} f"), *v);
        }
        for (j, s) in series.coefficients.iter().enumerate() {
            r.row(vec![j.into(), (*s).into()]);
        }
        return Ok((r, Some(hash)));
    }
    let levels = c.levels.resolve()?;
    let tol = c.common.tol.unwrap_or(DEFAULT_KERNEL_TOL);
    let mut columns = vec!["N", "lattice_points", "pair", "lattice_sum"];
    if c.by_density {
        columns.push("pair_by_density");
    }
    let mut r = Report::with_columns(columns);
    for n in levels {
        let measure =
            SpectralMeasure::from_context(std::sync::Arc::new(KernelContext::new(p.clone(), n).with_tol(tol)))?;
        let lattice_sum = toric_spectra::euler_maclaurin::riemann_sum(&p, f, n) * f64::from(n).powi(p.dim() as i32);
        let mut row = vec![
            n.into(),
            measure.lattice_points().len().into(),
            measure.pair(f)?.into(),
            lattice_sum.into(),
        ];
        if c.by_density {
            row.push(measure.pair_by_density(f, tol)?.into());
        }
        r.row(row);
    }
    Ok((r, Some(hash)))
}

fn measure_for(common: &Common, level: u32) -> CliResult<(SpectralMeasure, String)> {
    let (p, hash) = load_polytope(common)?;
    let ctx = KernelContext::new(p, level).with_tol(common.tol.unwrap_or(DEFAULT_KERNEL_TOL));
    Ok((SpectralMeasure::from_context(std::sync::Arc::new(ctx))?, hash))
}

fn moments(c: &Moments) -> CliResult<Dispatched> {
    let (measure, hash) = measure_for(&c.common, c.level)?;
    check_dim("--k", c.k.len(), measure.polytope().dim())?;
    let rep = measure.moment(&c.k, &c.m)?;
    let mut r = Report::with_columns(["m", "value", "prediction", "ratio"]);
    if let Some(f) = &c.f {
        check_poly(f, measure.polytope().dim())?;
        r.fact("eigensection average", measure.eigensection_average(&c.k, |y| f.eval(y))?);
    }
    for i in 0..rep.exponents.len() {
        r.row(vec![
            rep.exponents[i].into(),
            rep.values[i].into(),
            rep.predictions[i].into(),
            rep.ratios[i].into(),
        ]);
    }
    Ok((r, Some(hash)))
}

fn distribution(c: &Distribution) -> CliResult<Dispatched> {
    let (measure, hash) = measure_for(&c.common, c.level)?;
    check_dim("--k", c.k.len(), measure.polytope().dim())?;
    let ctx = measure.context();
    let peak = ctx.section_norm(&c.k, &ctx.lattice_point(&c.k)?)?;
    let t_grid = match &c.t {
        Some(t) => t.clone(),
        None => {
            if c.grid == 0 {
                return Err(CliError::usage("--grid must be positive"));
            }
            (1..=c.grid).map(|i| peak * i as f64 / c.grid as f64).collect()
        }
    };
    let tol = c.common.tol.unwrap_or(1e-10);
    let table = measure.distribution_function(&c.k, &t_grid, tol)?;
    let mut r = Report::with_columns(["t", "volume"]);
    r.fact("peak norm", peak);
    for (t, v) in table {
        r.row(vec![t.into(), v.into()]);
    }
    Ok((r, Some(hash)))
}

fn em_check(c: &EmCheck) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    check_poly(&c.f, p.dim())?;
    let levels = c.levels.resolve()?;
    let max_order = c.order.iter().copied().max().unwrap_or(0);
    if max_order > toric_spectra::euler_maclaurin::MAX_ORDER {
        return Err(CliError::validation(format!(
            "order {max_order} exceeds {}",
            toric_spectra::euler_maclaurin::MAX_ORDER
        )));
    }
    let rep = em_error_report(&p, |y| c.f.eval(y), &levels, &c.order)?;
    let tau = tau_coefficients(max_order);
    let exact: Vec<String> = levels
        .iter()
        .map(|&n| riemann_sum_exact(&p, &c.f, n).to_string())
        .collect();
    let mut r = Report::with_columns(["N", "order", "riemann_sum", "riemann_sum_exact", "em_sum", "abs_error"]);
    r.fact("integral", rep.integral);
    r.fact(
        "tau coefficients",
        tau.coefficients.iter().map(ToString::to_string).collect::<Vec<_>>().join(" "),
    );
    for (order, rate) in &rep.decay_rates {
        r.fact(&format!("decay rate order {order}"), *rate);
    }
    for row in &rep.rows {
        let i = levels.iter().position(|&n| n == row.level).expect("row level from grid");
        r.row(vec![
            row.level.into(),
            row.order.into(),
            row.riemann_sum.into(),
            exact[i].clone().into(),
            row.em_sum.into(),
            row.abs_error.into(),
        ]);
    }
    Ok((r, Some(hash)))
}

fn localize(c: &Localize) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    let dim = p.dim();
    check_dim("--x", c.x.0.len(), dim)?;
    check_dim("--y", c.y.0.len(), dim)?;
    check_poly(&c.f, dim)?;
    if !(c.delta > 0.0) {
        return Err(CliError::validation("--delta must be positive"));
    }
    let domain: KernelDomain = p.into();
    let cutoff = |y: &[f64]| -> f64 {
        y.iter()
            .zip(&c.y.0)
            .map(|(a, b)| Window::Bump.eval(&[(a - b) / c.delta]))
            .product()
    };
    let g = |y: &[f64]| c.f.eval(y) * cutoff(y);
    let logs = c
        .n_grid
        .par_iter()
        .map(|&n| Ok(context(&domain, n, c.common.tol).localization_ratio(|y| c.f.eval(y), g, &c.x.0)?))
        .collect::<toric_spectra::error::Result<Vec<_>>>()?;
    let ns: Vec<f64> = c.n_grid.iter().map(|&n| f64::from(n)).collect();
    let fit = fit_line(&ns, &logs.iter().map(|l| l.log_ratio).collect::<Vec<_>>());
    let mut r = Report::with_columns(["N", "log_ratio", "ratio"]);
    r.fact("slope", fit.slope);
    r.fact("intercept", fit.intercept);
    r.fact("r squared", fit.r_squared);
    for (&n, l) in c.n_grid.iter().zip(&logs) {
        r.row(vec![n.into(), l.log_ratio.into(), l.ratio.into()]);
    }
    Ok((r, Some(hash)))
}

fn pinch(c: &Pinch) -> CliResult<Dispatched> {
    let (p, hash) = load_polytope(&c.common)?;
    check_dim("--x", c.x.0.len(), p.dim())?;
    let domain: KernelDomain = p.into();
    let tol = c.common.tol.unwrap_or(DEFAULT_KERNEL_TOL);
    let rep = pinched_average(&domain, &c.x.0, c.delta, c.window.into(), &c.n_grid, tol)?;
    let mut r = Report::with_columns(["N", "value", "increment"]);
    r.fact("sigma0", rep.sigma0);
    r.fact("sigma1", rep.sigma1);
    r.fact("fitted exponent", rep.exponent);
    r.fact("fit residual", rep.fit_residual);
    r.fact("vanished", rep.vanished);
    for (i, (&n, &v)) in rep.n_grid.iter().zip(&rep.values).enumerate() {
        let inc = if i == 0 { None } else { rep.increments.get(i - 1).copied() };
        r.row(vec![n.into(), v.into(), inc.into()]);
    }
    Ok((r, Some(hash)))
}
