use crate::output::{fmt_float, nums, opt_num, text, Cell, Obj, Table};
use crate::{Command, CtrlArgs, Format, OutArgs, ParamArgs, Source};
use blowup_core::analysis::*;
use blowup_core::dynsys::*;
use blowup_core::integrate::{EventKind, ProfileTrajectory};
use blowup_core::model::*;
use blowup_core::shooting::*;
use serde_json::Value;
use std::fmt;
use std::io::Write;

/// Failures that stop the CLI before a report is written.
#[derive(Debug)]
pub enum CliError {
    Invalid(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Io(_) => 1,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(s) => write!(f, "invalid input: {s}"),
            CliError::Io(s) => write!(f, "{s}"),
        }
    }
}

fn invalid<E: fmt::Display>(e: E) -> CliError {
    CliError::Invalid(e.to_string())
}

/// Everything a command produces.
struct Report {
    command: &'static str,
    params: Value,
    outcome: Value,
    tolerances: Value,
    table: Option<Table>,
    provenance: String,
    inconclusive: bool,
}

pub fn run(cmd: Command) -> Result<u8, CliError> {
    let (report, out, default) = match cmd {
        Command::Exponents { params, out } => (exponents(&params)?, out, Format::Json),
        Command::Explicit { m, n, time_slices, out } => (explicit(m, n, time_slices.as_deref())?, out, Format::Csv),
        Command::ShootBack { params, eta, ctrl, out } => (shoot_back(&params, eta, &ctrl)?, out, Format::Json),
        Command::ShootOrigin { params, c, ctrl, out } => (shoot_origin(&params, c, &ctrl)?, out, Format::Json),
        Command::FindProfile { params, bracket, ctrl, out } => {
            (find_profile(&params, bracket.as_deref(), &ctrl)?, out, Format::Json)
        }
        Command::ScanC { params, grid, refine, ctrl, out } => (scan_c(&params, &grid, refine, &ctrl)?, out, Format::Json),
        Command::ScanSigma { m, sigma_grid, grid, ctrl, out } => {
            (scan_sigma(m, &sigma_grid, &grid, &ctrl)?, out, Format::Json)
        }
        Command::PhaseOrbit { params, from, delta, k, x0, x_handoff, ctrl, out } => {
            (phase_orbit(&params, from, delta, k, x0, x_handoff, &ctrl)?, out, Format::Json)
        }
    };
    emit(&report, &out, default)?;
    Ok(if report.inconclusive { 3 } else { 0 })
}

fn emit(r: &Report, out: &OutArgs, default: Format) -> Result<(), CliError> {
    let text = match out.format.unwrap_or(default) {
        Format::Json => {
            let v = Obj::new()
                .s("command", r.command)
                .put("params", r.params.clone())
                .put("outcome", r.outcome.clone())
                .put("tolerances_used", r.tolerances.clone())
                .value();
            serde_json::to_string_pretty(&v).map_err(|e| CliError::Io(e.to_string()))? + "\n"
        }
        Format::Csv => match &r.table {
            Some(t) => t.render(&r.provenance).map_err(|e| CliError::Io(e.to_string()))?,
            None => return Err(CliError::Invalid(format!("`{}` has no CSV output", r.command))),
        },
    };
    match &out.out {
        Some(path) => std::fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(CliError::Io(e.to_string())),
                _ => Ok(()),
            }
        }
    }
}

fn resolve(a: &ParamArgs) -> Result<Params, CliError> {
    if a.sigma_star {
        Params::at_sigma_star(a.m).map_err(invalid)
    } else {
        Params::new(a.m, a.sigma.unwrap_or(f64::NAN)).map_err(invalid)
    }
}

fn shoot_config(c: &CtrlArgs) -> Result<ShootConfig, CliError> {
    let mut cfg = ShootConfig::default();
    if let Some(x) = c.rtol {
        cfg.ctrl.rtol = x;
    }
    if let Some(x) = c.atol {
        cfg.ctrl.atol = x;
    }
    if let Some(x) = c.max_steps {
        cfg.ctrl.max_steps = x;
    }
    if let Some(x) = c.xi_min {
        cfg.ctrl.xi_min = x;
    }
    if let Some(x) = c.z_cut {
        if !(x.is_finite() && x > 1.0) {
            return Err(CliError::Invalid(format!("z-cut must exceed 1, got {x}")));
        }
        cfg.tol.z_cut = x;
    }
    cfg.ctrl.validate().map_err(invalid)?;
    Ok(cfg)
}

fn params_json(p: &Params) -> Value {
    let e = p.exponents();
    Obj::new().f("m", p.m()).f("sigma", p.sigma()).f("alpha", e.alpha).f("beta", e.beta).value()
}

fn tolerances_json(cfg: &ShootConfig) -> Value {
    let c = &cfg.ctrl;
    let t = &cfg.tol;
    Obj::new()
        .f("rtol", c.rtol)
        .f("atol", c.atol)
        .f("h_init", c.h_init)
        .f("h_max", c.h_max)
        .put("max_steps", Value::from(c.max_steps))
        .f("xi_min", c.xi_min)
        .f("bound_huge", c.bound_huge)
        .put("slaving", Value::Bool(c.slaving))
        .f("stiff_on", c.stiff_on)
        .f("stiff_off", c.stiff_off)
        .f("slope_tol", t.slope_tol)
        .f("fmslope_tol", t.fmslope_tol)
        .f("z_cut", t.z_cut)
        .f("tail_tol", t.tail_tol)
        .f("tail_window_frac", t.tail_window_frac)
        .f("eps_rel", t.eps_rel)
        .f("x_launch", t.x_launch)
        .f("z_launch", t.z_launch)
        .f("bisect_rel", t.bisect_rel)
        .f("capture_radius", t.capture_radius)
        .value()
}

fn provenance(command: &str, p: Option<&Params>, cfg: &ShootConfig, extra: &str) -> String {
    let mut s = format!(
        "blowup-cli {} blowup-core {} command={command}",
        env!("CARGO_PKG_VERSION"),
        blowup_core::VERSION
    );
    if let Some(p) = p {
        s += &format!(" m={} sigma={}", fmt_float(p.m()), fmt_float(p.sigma()));
    }
    s += &format!(
        " rtol={} atol={} max_steps={} xi_min={} z_cut={} tail_tol={}",
        fmt_float(cfg.ctrl.rtol),
        fmt_float(cfg.ctrl.atol),
        cfg.ctrl.max_steps,
        fmt_float(cfg.ctrl.xi_min),
        fmt_float(cfg.tol.z_cut),
        fmt_float(cfg.tol.tail_tol)
    );
    if !extra.is_empty() {
        s += " ";
        s += extra;
    }
    s
}

fn event_name(k: &EventKind) -> &'static str {
    match k {
        EventKind::VHitsZero => "VHitsZero",
        EventKind::VDiverges => "VDiverges",
        EventKind::YCrossesValue(_) => "YCrossesValue",
        EventKind::ZReaches(_) => "ZReaches",
        EventKind::StateNearPoint { .. } => "StateNearPoint",
        EventKind::StepBudgetExhausted => "StepBudgetExhausted",
        EventKind::ReachedXiMin => "ReachedXiMin",
        EventKind::TailEntry { .. } => "TailEntry",
    }
}

fn failed(msg: String) -> Value {
    Obj::new().s("kind", "Inconclusive").s("error", &msg).value()
}

fn profile_table(tr: &ProfileTrajectory) -> Table {
    let p = &tr.params;
    let mut t = Table::new(&["xi", "v", "w", "f", "fprime"]);
    for s in tr.ascending() {
        t.floats(&[s.xi, s.v, s.w, s.f(p), s.fprime(p)]);
    }
    t
}

fn exponents(a: &ParamArgs) -> Result<Report, CliError> {
    let p = resolve(a)?;
    let e = p.exponents();
    let cfg = ShootConfig::default();
    let mut t = Table::new(&["alpha", "beta"]);
    t.floats(&[e.alpha, e.beta]);
    Ok(Report {
        command: "exponents",
        params: Obj::new().f("m", p.m()).f("sigma", p.sigma()).value(),
        outcome: Obj::new().f("alpha", e.alpha).f("beta", e.beta).value(),
        tolerances: Obj::new().value(),
        table: Some(t),
        provenance: provenance("exponents", Some(&p), &cfg, ""),
        inconclusive: false,
    })
}

fn explicit(m: f64, n: usize, slices: Option<&[f64]>) -> Result<Report, CliError> {
    let p = Params::at_sigma_star(m).map_err(invalid)?;
    if n < 2 {
        return Err(CliError::Invalid(format!("n must be at least 2, got {n}")));
    }
    let (big_t, times) = match slices {
        None => (f64::NAN, Vec::new()),
        Some([big_t, rest @ ..]) if !rest.is_empty() => {
            if !big_t.is_finite() || rest.iter().any(|t| !(t.is_finite() && t < big_t)) {
                return Err(CliError::Invalid("time slices need finite t < T".into()));
            }
            (*big_t, rest.to_vec())
        }
        Some(_) => return Err(CliError::Invalid("time slices need T followed by at least one t".into())),
    };
    let x1 = explicit_support_edge(m);
    let e = p.exponents();
    let mut residual: f64 = 0.0;
    for i in 0..=1000 {
        let xi = x1 * (0.01 + 0.98 * i as f64 / 1000.0);
        let (v, w) = explicit_pressure(m, xi);
        let s = ProfileState::new(xi, v, w);
        let fpp = s.fsecond(&p).map_err(invalid)?;
        residual = residual.max(profile_residual_f(&p, xi, s.f(&p), s.fprime(&p), fpp).abs());
    }
    let mut cols: Vec<String> = vec!["xi".into(), "f".into()];
    let tau_min = times.iter().map(|t| big_t - t).fold(f64::INFINITY, f64::min);
    let x_end = 1.05 * x1 / tau_min.powf(e.beta);
    if !times.is_empty() {
        cols.push("x".into());
        cols.extend(times.iter().map(|t| format!("u_t={}", fmt_float(*t))));
    }
    let mut table = Table { columns: cols, rows: Vec::new() };
    let prof = ExplicitProfile { m };
    for i in 0..n {
        let xi = 1.05 * x1 * i as f64 / (n - 1) as f64;
        let mut row = vec![xi, explicit_profile(m, xi)];
        if !times.is_empty() {
            let x = x_end * i as f64 / (n - 1) as f64;
            row.push(x);
            for &t in &times {
                row.push(selfsimilar_eval(&prof, &p, big_t, x, t).map_err(invalid)?);
            }
        }
        table.floats(&row);
    }
    let cfg = ShootConfig::default();
    Ok(Report {
        command: "explicit",
        params: params_json(&p),
        outcome: Obj::new()
            .f("xi1", x1)
            .f("gamma_star", explicit_gamma(m))
            .f("max_residual", residual)
            .put("rows", Value::from(n))
            .put("time_slices", nums(&times))
            .value(),
        tolerances: Obj::new().value(),
        table: Some(table),
        provenance: provenance("explicit", Some(&p), &cfg, &format!("max_residual={}", fmt_float(residual))),
        inconclusive: false,
    })
}

fn backward_json(o: &BackwardOutcome) -> Obj {
    let mut j = Obj::new().s("kind", o.kind.name()).f("eta", o.eta);
    j = match o.kind {
        BackwardKind::SignChange { theta } => j.f("theta", theta),
        BackwardKind::PositiveAtZero { a, slope } => j.f("a", a).f("slope", slope),
        BackwardKind::GoodCandidate { a } => j.f("a", a),
        _ => j,
    };
    let origin = o.origin.map_or(Value::Null, |d| {
        Obj::new().f("value", d.value).f("slope", d.slope).f("fm_slope", d.fm_slope).f("f_last", d.f_last).value()
    });
    j.put("origin", origin)
        .f("p2_distance", o.p2_distance)
        .f("p2_closest_xi", o.p2_closest_xi)
        .s("termination", event_name(&o.trajectory.termination.kind))
        .f("termination_xi", o.trajectory.termination.location)
        .put("samples", Value::from(o.trajectory.samples.len()))
}

fn origin_fit_json(r: blowup_core::Result<OriginFit>) -> Value {
    match r {
        Ok(f) => Obj::new()
            .f("exponent", f.exponent)
            .f("coefficient", f.coefficient)
            .f("rms_residual", f.rms_residual)
            .s("matched_law", f.matched_law.name())
            .value(),
        Err(e) => Obj::new().s("error", &e.to_string()).value(),
    }
}

fn forward_json(o: &ForwardOutcome) -> Obj {
    let mut j = Obj::new().s("kind", o.kind.class().name());
    j = match o.kind {
        ForwardKind::Interface { xi0, gamma } => j.f("xi0", xi0).f("gamma", gamma),
        ForwardKind::TransversalZero { xi0 } => j.f("xi0", xi0),
        ForwardKind::Tail { ln_k } => j.f("ln_k", ln_k),
        ForwardKind::Inconclusive => j,
    };
    let t = &o.trajectory.termination;
    j.put("tail_drift", opt_num(o.tail_drift))
        .s("termination", event_name(&t.kind))
        .f("termination_xi", t.location)
        .put("terminal_fm_slope", opt_num(t.fm_slope))
        .put("samples", Value::from(o.trajectory.samples.len()))
}

fn shoot_back(a: &ParamArgs, eta: f64, c: &CtrlArgs) -> Result<Report, CliError> {
    let p = resolve(a)?;
    let cfg = shoot_config(c)?;
    if !(eta.is_finite() && eta > 0.0) {
        return Err(CliError::Invalid(format!("eta must be positive, got {eta}")));
    }
    let (outcome, table, inconclusive) = match shoot_from_interface(&p, eta, &cfg) {
        Ok(o) => {
            let bad = matches!(o.kind, BackwardKind::Inconclusive);
            (backward_json(&o).value(), Some(profile_table(&o.trajectory)), bad)
        }
        Err(e) => (failed(e.to_string()), None, true),
    };
    Ok(Report {
        command: "shoot-back",
        params: Obj::new().put("model", params_json(&p)).f("eta", eta).value(),
        outcome,
        tolerances: tolerances_json(&cfg),
        table,
        provenance: provenance("shoot-back", Some(&p), &cfg, &format!("eta={}", fmt_float(eta))),
        inconclusive,
    })
}

fn shoot_origin(a: &ParamArgs, c: f64, ca: &CtrlArgs) -> Result<Report, CliError> {
    let p = resolve(a)?;
    let cfg = shoot_config(ca)?;
    if !(c.is_finite() && c > 0.0) {
        return Err(CliError::Invalid(format!("c must be positive, got {c}")));
    }
    let (outcome, table, inconclusive) = match shoot_from_origin(&p, c, &cfg) {
        Ok(o) => {
            let k = origin_coefficient_to_k(&p, c).map_err(invalid)?;
            let bad = o.kind == ForwardKind::Inconclusive;
            (forward_json(&o).f("k", k).value(), Some(profile_table(&o.trajectory)), bad)
        }
        Err(e) => (failed(e.to_string()), None, true),
    };
    Ok(Report {
        command: "shoot-origin",
        params: Obj::new().put("model", params_json(&p)).f("c", c).value(),
        outcome,
        tolerances: tolerances_json(&cfg),
        table,
        provenance: provenance("shoot-origin", Some(&p), &cfg, &format!("c={}", fmt_float(c))),
        inconclusive,
    })
}

fn find_profile(a: &ParamArgs, bracket: Option<&[f64]>, c: &CtrlArgs) -> Result<Report, CliError> {
    let p = resolve(a)?;
    let cfg = shoot_config(c)?;
    let bracket = match bracket {
        None => None,
        Some(&[lo, hi]) if lo > 0.0 && hi > lo && hi.is_finite() => Some((lo, hi)),
        Some(b) => return Err(CliError::Invalid(format!("bracket must satisfy 0 < lo < hi, got {b:?}"))),
    };
    let at_star = sigma_star(p.m()).map_or(false, |s| s == p.sigma());
    let (outcome, table, inconclusive) = match find_good_profile(&p, bracket, &cfg) {
        Ok(g) => {
            let tr = &g.outcome.trajectory;
            let fit = fit_origin(tr, &p, g.outcome.origin_window(cfg.tol.capture_radius));
            let mut j = Obj::new()
                .f("eta_star", g.eta_star)
                .put("bracket", nums(&[g.bracket.0, g.bracket.1]))
                .s("lo_kind", g.lo_kind.name())
                .s("hi_kind", g.hi_kind.name())
                .put("profile", backward_json(&g.outcome).value())
                .put("origin_fit", origin_fit_json(fit));
            if at_star {
                j = j.put("explicit_comparison", explicit_comparison(&p, tr, g.eta_star));
            }
            let bad = matches!(g.outcome.kind, BackwardKind::Inconclusive);
            (j.value(), Some(profile_table(tr)), bad)
        }
        Err(e) => (failed(e.to_string()), None, true),
    };
    Ok(Report {
        command: "find-profile",
        params: Obj::new()
            .put("model", params_json(&p))
            .put("bracket", bracket.map_or(Value::Null, |(l, h)| nums(&[l, h])))
            .value(),
        outcome,
        tolerances: tolerances_json(&cfg),
        table,
        provenance: provenance("find-profile", Some(&p), &cfg, ""),
        inconclusive,
    })
}

fn explicit_comparison(p: &Params, tr: &ProfileTrajectory, eta_star: f64) -> Value {
    let m = p.m();
    let x1 = explicit_support_edge(m);
    let (lo, hi) = tr.xi_range();
    let (a, b) = (0.1f64.max(lo), (0.9 * x1).min(hi));
    let mut rel: f64 = 0.0;
    for i in 0..=1000 {
        let xi = a + (b - a) * i as f64 / 1000.0;
        let fe = explicit_profile(m, xi);
        if let Ok(f) = tr.f_at(xi) {
            rel = rel.max(((f - fe) / fe).abs());
        }
    }
    Obj::new()
        .f("xi1", x1)
        .f("eta_star_error", eta_star - x1)
        .put("window", nums(&[a, b]))
        .f("max_relative_error", rel)
        .value()
}

fn parse_grid(src: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Invalid(format!("bad grid `{src}`; use log:a:b:n, lin:a:b:n or a comma list"));
    let parts: Vec<&str> = src.split(':').collect();
    let grid = match parts.as_slice() {
        [kind @ ("log" | "lin"), a, b, n] => {
            let a: f64 = a.parse().map_err(|_| bad())?;
            let b: f64 = b.parse().map_err(|_| bad())?;
            let n: usize = n.parse().map_err(|_| bad())?;
            if n == 0 || !a.is_finite() || !b.is_finite() || (n > 1 && b <= a) {
                return Err(bad());
            }
            if *kind == "log" {
                logspace(a, b, n)
            } else if n == 1 {
                vec![a]
            } else {
                (0..n).map(|i| a + (b - a) * i as f64 / (n - 1) as f64).collect()
            }
        }
        [list] => list.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| bad())).collect::<Result<_, _>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|x| !(x.is_finite() && *x > 0.0)) || grid.windows(2).any(|w| w[1] <= w[0])
    {
        return Err(CliError::Invalid(format!("grid `{src}` must be positive and strictly increasing")));
    }
    Ok(grid)
}

/// A scan is reported Inconclusive when at least a tenth of its shoots are.
fn scan_inconclusive(incon: usize, total: usize) -> bool {
    total == 0 || 10 * incon >= total
}

fn scan_c(a: &ParamArgs, grid: &str, refine: bool, c: &CtrlArgs) -> Result<Report, CliError> {
    let p = resolve(a)?;
    let cfg = shoot_config(c)?;
    let cs = parse_grid(grid)?;
    let (outcome, table, inconclusive) = match classify_c_intervals(&p, &cs, &cfg) {
        Ok(k) => {
            let intervals = |class: ForwardClass| {
                Value::Array(k.intervals.iter().filter(|i| i.class == class).map(|i| nums(&[i.c_lo, i.c_hi])).collect())
            };
            let entries: Vec<Value> = k
                .entries
                .iter()
                .map(|(c, kind)| {
                    let j = Obj::new().f("c", *c).s("kind", kind.class().name());
                    match *kind {
                        ForwardKind::Interface { xi0, gamma } => j.f("xi0", xi0).f("gamma", gamma),
                        ForwardKind::TransversalZero { xi0 } => j.f("xi0", xi0),
                        ForwardKind::Tail { ln_k } => j.f("ln_k", ln_k),
                        ForwardKind::Inconclusive => j,
                    }
                    .value()
                })
                .collect();
            let mut j = Obj::new()
                .put("tail_intervals", intervals(ForwardClass::Tail))
                .put("transversal_intervals", intervals(ForwardClass::TransversalZero))
                .put("interface_intervals", intervals(ForwardClass::Interface))
                .put("inconclusive_intervals", intervals(ForwardClass::Inconclusive))
                .put("brackets", Value::Array(k.brackets.iter().map(|b| nums(&[b.0, b.1])).collect()))
                .put("inconclusive", Value::from(k.inconclusive))
                .put("total", Value::from(k.entries.len()))
                .put("entries", Value::Array(entries));
            if refine {
                j = j.put("interface_search", refine_json(&p, k.brackets.first().copied(), &cfg));
            }
            let mut t = Table::new(&["c", "kind", "xi0", "ln_k"]);
            for (c, kind) in &k.entries {
                let (xi0, lnk) = match *kind {
                    ForwardKind::Interface { xi0, .. } | ForwardKind::TransversalZero { xi0 } => (Some(xi0), None),
                    ForwardKind::Tail { ln_k } => (None, Some(ln_k)),
                    ForwardKind::Inconclusive => (None, None),
                };
                let opt = |x: Option<f64>| x.map_or(Cell::S(String::new()), Cell::F);
                t.push(vec![Cell::F(*c), Cell::S(kind.class().name().into()), opt(xi0), opt(lnk)]);
            }
            (j.value(), Some(t), scan_inconclusive(k.inconclusive, k.entries.len()))
        }
        Err(e) => (failed(e.to_string()), None, true),
    };
    Ok(Report {
        command: "scan-c",
        params: Obj::new().put("model", params_json(&p)).put("c_grid", nums(&cs)).value(),
        outcome,
        tolerances: tolerances_json(&cfg),
        table,
        provenance: provenance("scan-c", Some(&p), &cfg, &format!("grid={grid}")),
        inconclusive,
    })
}

fn refine_json(p: &Params, bracket: Option<(f64, f64)>, cfg: &ShootConfig) -> Value {
    let Some(b) = bracket else {
        return Value::Null;
    };
    match find_interface_c(p, b, cfg) {
        Ok(s) => {
            let tr = &s.outcome.trajectory;
            Obj::new()
                .f("c_star", s.c_star)
                .put("bracket", nums(&[s.bracket.0, s.bracket.1]))
                .put("outcome", forward_json(&s.outcome).value())
                .put("origin_fit", origin_fit_json(fit_origin(tr, p, default_origin_window(tr))))
                .value()
        }
        Err(e) => failed(e.to_string()),
    }
}

fn scan_sigma(m: f64, sigma_grid: &str, grid: &str, c: &CtrlArgs) -> Result<Report, CliError> {
    Params::new(m, 1.0).map_err(invalid)?;
    let cfg = shoot_config(c)?;
    let sigmas = parse_grid(sigma_grid)?;
    let cs = parse_grid(grid)?;
    let (outcome, table, inconclusive) = match regime_scan(m, &sigmas, &cs, &cfg) {
        Ok(reports) => {
            let mut t = Table::new(&[
                "sigma",
                "all_tail",
                "has_interface_from_origin",
                "has_transversal",
                "blowup_character",
                "good_profile_origin_value",
                "origin_exponent",
                "inconclusive",
                "total",
            ]);
            let mut rows = Vec::new();
            let (mut incon, mut total) = (0, 0);
            for r in &reports {
                incon += r.inconclusive;
                total += r.total;
                rows.push(
                    Obj::new()
                        .f("sigma", r.sigma)
                        .put("all_tail", Value::Bool(r.all_tail))
                        .put("has_interface_from_origin", Value::Bool(r.has_interface_from_origin))
                        .put("has_transversal", Value::Bool(r.has_transversal))
                        .f("good_profile_origin_value", r.good_profile_origin_value)
                        .s("blowup_character", r.blowup_character.name())
                        .put("origin_fit", r.origin_fit.map_or(Value::Null, |f| origin_fit_json(Ok(f))))
                        .put("good_profile_interface", opt_num(r.good_profile_interface))
                        .put("inconclusive", Value::from(r.inconclusive))
                        .put("total", Value::from(r.total))
                        .put("in_all_tail_range", Value::Bool(r.in_all_tail_range))
                        .put("above_sigma_star", Value::Bool(r.above_sigma_star))
                        .put("note", r.note.as_deref().map_or(Value::Null, text))
                        .value(),
                );
                let b = |x: bool| Cell::S(x.to_string());
                t.push(vec![
                    Cell::F(r.sigma),
                    b(r.all_tail),
                    b(r.has_interface_from_origin),
                    b(r.has_transversal),
                    Cell::S(r.blowup_character.name().into()),
                    Cell::F(r.good_profile_origin_value),
                    r.origin_fit.map_or(Cell::S(String::new()), |f| Cell::F(f.exponent)),
                    Cell::S(r.inconclusive.to_string()),
                    Cell::S(r.total.to_string()),
                ]);
            }
            let j = Obj::new()
                .f("sigma0", sigma0_cubic_root(m))
                .put("sigma_star", opt_num(sigma_star(m).ok()))
                .put("reports", Value::Array(rows))
                .put("inconclusive", Value::from(incon))
                .put("total", Value::from(total));
            (j.value(), Some(t), scan_inconclusive(incon, total))
        }
        Err(e) => (failed(e.to_string()), None, true),
    };
    Ok(Report {
        command: "scan-sigma",
        params: Obj::new().f("m", m).put("sigma_grid", nums(&sigmas)).put("c_grid", nums(&cs)).value(),
        outcome,
        tolerances: tolerances_json(&cfg),
        table,
        provenance: provenance("scan-sigma", None, &cfg, &format!("m={} sigma_grid={sigma_grid} grid={grid}", fmt_float(m))),
        inconclusive,
    })
}

fn phase_orbit(
    a: &ParamArgs,
    from: Source,
    delta: f64,
    k: f64,
    x0: f64,
    x_handoff: f64,
    c: &CtrlArgs,
) -> Result<Report, CliError> {
    let p = resolve(a)?;
    let cfg = shoot_config(c)?;
    if !(x_handoff.is_finite() && x_handoff > 0.0) {
        return Err(CliError::Invalid(format!("x-handoff must be positive, got {x_handoff}")));
    }
    let launch = match from {
        Source::P2 => PhaseLaunch::FromP2 { delta },
        Source::P0 => PhaseLaunch::FromP0 { k, x0 },
    };
    let start = phase_launch_state(&p, launch).map_err(invalid)?;
    let at_star = sigma_star(p.m()).map_or(false, |s| s == p.sigma());
    let (outcome, table, inconclusive) = match shoot_phase_orbit(&p, launch, x_handoff, &[], &cfg) {
        Ok(o) => {
            let mut t = Table::new(&["eta", "X", "Y", "Z"]);
            let mut line: f64 = 0.0;
            for (eta, s) in &o.phase.samples {
                t.floats(&[*eta, s.x, s.y, s.z]);
                line = line.max(explicit_line_distance(p.m(), s));
            }
            let mut eta = o.phase.termination.location;
            if let Some(cont) = &o.continuation {
                let phase: Vec<(f64, PhaseState)> = cont
                    .trajectory
                    .samples
                    .iter()
                    .filter(|s| s.v > 0.0)
                    .filter_map(|s| profile_to_phase(&p, s).ok().map(|ph| (s.xi, ph)))
                    .collect();
                for (i, (xi, s)) in phase.iter().enumerate() {
                    if i > 0 {
                        let (xp, sp) = &phase[i - 1];
                        eta += (xi / xp).ln() * 0.5 * (1.0 / sp.x + 1.0 / s.x);
                        t.floats(&[eta, s.x, s.y, s.z]);
                    }
                    line = line.max(explicit_line_distance(p.m(), s));
                }
            }
            let cont = o.continuation.as_ref().map_or(Value::Null, |f| forward_json(f).value());
            let term = &o.phase.termination;
            let mut j = Obj::new()
                .s("kind", o.kind().class().name())
                .put("launch", nums(&start.to_array()))
                .s("phase_termination", event_name(&term.kind))
                .put("phase_terminal_state", nums(&term.state.to_array()))
                .put("phase_samples", Value::from(o.phase.samples.len()))
                .put("continuation", cont);
            if at_star && from == Source::P2 {
                j = j.f("max_line_distance", line);
            }
            (j.value(), Some(t), o.kind() == ForwardKind::Inconclusive)
        }
        Err(e) => (failed(e.to_string()), None, true),
    };
    let from_name = match from {
        Source::P2 => "P2",
        Source::P0 => "P0",
    };
    let mut params = Obj::new().put("model", params_json(&p)).s("from", from_name);
    params = match from {
        Source::P2 => params.f("delta", delta),
        Source::P0 => params.f("k", k).f("x0", x0),
    };
    Ok(Report {
        command: "phase-orbit",
        params: params.f("x_handoff", x_handoff).value(),
        outcome,
        tolerances: tolerances_json(&cfg),
        table,
        provenance: provenance("phase-orbit", Some(&p), &cfg, &format!("from={from_name}")),
        inconclusive,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids_parse() {
        assert_eq!(parse_grid("log:0:2:3").unwrap(), vec![1.0, 10.0, 100.0]);
        assert_eq!(parse_grid("lin:1:2:3").unwrap(), vec![1.0, 1.5, 2.0]);
        assert_eq!(parse_grid("0.5,2,4").unwrap(), vec![0.5, 2.0, 4.0]);
        assert!(parse_grid("log:2:0:3").is_err());
        assert!(parse_grid("lin:-1:2:3").is_err());
        assert!(parse_grid("2,1").is_err());
        assert!(parse_grid("cubic:1:2:3").is_err());
    }

    #[test]
    fn inconclusive_threshold() {
        assert!(!scan_inconclusive(2, 25));
        assert!(scan_inconclusive(3, 25));
        assert!(scan_inconclusive(0, 0));
    }
}
