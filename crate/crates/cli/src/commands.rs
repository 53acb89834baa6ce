use std::collections::{BTreeSet, HashMap};
use std::fmt::Write as _;
use std::path::PathBuf;

use rayon::prelude::*;
use serde::Serialize;

use ddxy::meanfield::{
    evolve_mf, inhomogeneous_chain_steady, sweep_point, uniform_steady_states, ClassifyConfig,
    SweepGrid, SWEEP_CSV_HEADER,
};
use ddxy::stability::{chain_response, scan_stability, DEFAULT_K_POINTS};
use ddxy::trajectories::{
    ensemble_stats, extract_switching_times_many, run_ensemble, SwitchingTimes, TrajectoryConfig,
    DEFAULT_DT_GAMMA, MIN_BURN_IN,
};
use ddxy::{Bloch, BlochField, CouplingSpec, ModelParams};

use crate::config::Settings;
use crate::error::CliError;
use crate::output::OutDir;

pub struct Context {
    pub out: PathBuf,
    pub seed: u64,
    pub threads: usize,
}

fn grid(
    s: &mut Settings,
    section: &str,
    defaults: [f64; 4],
    steps: [usize; 2],
) -> Result<SweepGrid, CliError> {
    let mut axis = |k: &str, d: f64| s.resolve(&format!("{section}.{k}"), d);
    let grid = SweepGrid {
        mu_min: axis("mu_min", defaults[0])?,
        mu_max: axis("mu_max", defaults[1])?,
        omega_min: axis("omega_min", defaults[2])?,
        omega_max: axis("omega_max", defaults[3])?,
        mu_steps: s.resolve(&format!("{section}.mu_steps"), steps[0])?,
        omega_steps: s.resolve(&format!("{section}.omega_steps"), steps[1])?,
    };
    grid.validate()?;
    Ok(grid)
}

fn point_key(mu: f64, omega: f64) -> String {
    format!("{mu},{omega}")
}

/// Grid indices already present in an earlier output file.
fn completed(
    out: &OutDir,
    name: &str,
    grid: &SweepGrid,
    header: &str,
) -> Result<BTreeSet<usize>, CliError> {
    let path = out.path(name);
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(BTreeSet::new()),
        Err(e) => return Err(CliError::io(&path, e)),
    };
    let mut lines = text.lines();
    match lines.next() {
        None => return Ok(BTreeSet::new()),
        Some(h) if h == header => {}
        Some(_) => {
            return Err(CliError::Config(format!(
                "{}: header does not match, refusing to resume",
                path.display()
            )))
        }
    }
    let index: HashMap<String, usize> = (0..grid.len())
        .map(|i| {
            let (m, o) = grid.point(i);
            (point_key(m, o), i)
        })
        .collect();
    let mut done = BTreeSet::new();
    for line in lines {
        let mut f = line.splitn(3, ',');
        if let (Some(m), Some(o)) = (f.next(), f.next()) {
            if let Some(&i) = index.get(&format!("{m},{o}")) {
                done.insert(i);
            }
        }
    }
    Ok(done)
}

/// Evaluates the pending grid points in chunks, appending each chunk in
/// grid order and flushing it before the next starts.
fn chunked_grid<F>(
    out: &mut OutDir,
    name: &str,
    header: &str,
    grid: &SweepGrid,
    chunk: usize,
    resume: bool,
    row: F,
) -> Result<usize, CliError>
where
    F: Fn(usize) -> String + Sync,
{
    let done = if resume {
        completed(out, name, grid, header)?
    } else {
        BTreeSet::new()
    };
    let fresh = done.is_empty();
    let mut sink = out.open(name, !fresh)?;
    if fresh {
        sink.line(header)?;
        sink.flush()?;
    }
    let todo: Vec<usize> = (0..grid.len()).filter(|i| !done.contains(i)).collect();
    for part in todo.chunks(chunk.max(1)) {
        let rows: Vec<String> = part.par_iter().map(|&i| row(i)).collect();
        for r in rows {
            sink.line(&r)?;
        }
        sink.flush()?;
    }
    Ok(todo.len())
}

pub fn mf_sweep(ctx: &Context, s: &mut Settings, resume: bool) -> Result<(), CliError> {
    let model = s.model(&ModelParams::default())?;
    let grid = grid(s, "sweep", [-10.0, 15.0, 0.0, 14.0], [40, 40])?;
    let chunk = s.resolve("sweep.chunk", 64usize)?;
    let d = ClassifyConfig::default();
    let cfg = ClassifyConfig {
        seed: ctx.seed,
        n_random: s.resolve("classify.n_random", d.n_random)?,
        total: s.resolve("classify.t_total", d.total)?,
        transient: s.resolve("classify.transient", d.transient)?,
        ..d
    };
    if !(cfg.transient >= 0.0 && cfg.total > cfg.transient) {
        return Err(CliError::Config(
            "classify.t_total must exceed classify.transient".into(),
        ));
    }
    let mut out = OutDir::create(&ctx.out)?;
    let computed = chunked_grid(
        &mut out,
        "mf_sweep.csv",
        SWEEP_CSV_HEADER,
        &grid,
        chunk,
        resume,
        |i| sweep_point(&grid, i, &model, &cfg).to_csv(),
    )?;
    eprintln!("mf-sweep: {computed} of {} points computed", grid.len());
    out.manifest("mf-sweep", ctx.seed, ctx.threads, s)
}

#[derive(Serialize)]
struct BranchReport {
    branch: usize,
    sx: f64,
    sy: f64,
    sz: f64,
    photon_number: f64,
    stable_at_k0: bool,
    classification: &'static str,
    k_star: f64,
    max_re: f64,
    chain_k_peak: Option<f64>,
    chain_growth_factor: Option<f64>,
    csv: String,
}

pub fn stability(ctx: &Context, s: &mut Settings) -> Result<(), CliError> {
    let model = s.model(&ModelParams::default())?;
    let n_k = s.resolve("stability.k_points", DEFAULT_K_POINTS)?;
    let chain = s.resolve("stability.chain_sites", 0usize)?;
    let mut out = OutDir::create(&ctx.out)?;
    let mut reports = Vec::new();
    for (b, st) in uniform_steady_states(&model)?.iter().enumerate() {
        let r = scan_stability(st.bloch, &model, n_k)?;
        let mut csv =
            String::from("k,re_omega_1,re_omega_2,re_omega_3,im_omega_1,im_omega_2,im_omega_3\n");
        for (k, ev) in r.k_grid.iter().zip(&r.eigenvalues) {
            let mut ev = *ev;
            ev.sort_by(|a, b| b.re.total_cmp(&a.re).then(b.im.total_cmp(&a.im)));
            let _ = writeln!(
                csv,
                "{k},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e},{:.12e}",
                ev[0].re, ev[1].re, ev[2].re, ev[0].im, ev[1].im, ev[2].im
            );
        }
        let name = format!("stability_branch{b}.csv");
        out.write(&name, &csv)?;
        let (mut k_peak, mut growth) = (None, None);
        if chain > 0 && r.max_re > 0.0 {
            let c = chain_response(
                st.bloch,
                &model,
                chain,
                1e-6,
                ctx.seed.wrapping_add(b as u64),
                200.0,
                1e-3,
                0.1,
                1e-3,
            )?;
            k_peak = Some(c.k_peak);
            growth = Some(c.growth_factor);
        }
        reports.push(BranchReport {
            branch: b,
            sx: st.bloch.x,
            sy: st.bloch.y,
            sz: st.bloch.z,
            photon_number: st.photon_number(),
            stable_at_k0: st.stable_at_k0,
            classification: r.classification.as_str(),
            k_star: r.k_star,
            max_re: r.max_re,
            chain_k_peak: k_peak,
            chain_growth_factor: growth,
            csv: name,
        });
    }
    out.write_json(
        "stability.json",
        &serde_json::json!({ "params": model, "branches": reports }),
    )?;
    out.manifest("stability", ctx.seed, ctx.threads, s)
}

/// Dark and bright stable uniform branches, scaled to the total photon
/// number of `n` sites.
fn switching_levels(model: &ModelParams, n: usize) -> Result<Option<(f64, f64)>, CliError> {
    let stable: Vec<f64> = uniform_steady_states(model)?
        .iter()
        .filter(|s| s.stable_at_k0)
        .map(|s| s.photon_number() * n as f64)
        .collect();
    Ok(match stable.as_slice() {
        [lo, .., hi] if hi > lo => Some((*lo, *hi)),
        _ => None,
    })
}

#[derive(Serialize)]
struct TrajectoryStats {
    n_trajectories: usize,
    burn_in: f64,
    sigma_y_corr: Option<Vec<f64>>,
    stderr: Option<Vec<f64>>,
    photon_number: Option<f64>,
    photon_number_se: Option<f64>,
    #[serde(rename = "dN2_over_N")]
    dn2_over_n: Option<f64>,
    #[serde(rename = "dN2_over_N_se")]
    dn2_over_n_se: Option<f64>,
    switching_levels: Option<[f64; 2]>,
    tau1: Option<f64>,
    tau2: Option<f64>,
    tau1_se: Option<f64>,
    tau2_se: Option<f64>,
    gamma_toy: Option<f64>,
    gamma_toy_se: Option<f64>,
    n_switches: Option<usize>,
    notes: Vec<String>,
}

pub fn trajectory(
    ctx: &Context,
    s: &mut Settings,
    require_switching: bool,
) -> Result<(), CliError> {
    let defaults = ModelParams {
        mu: -2.5,
        omega: 2.5,
        coupling: CouplingSpec::NearestNeighbor1D {
            n: 12,
            periodic: true,
        },
        ..ModelParams::default()
    };
    let model = s.model(&defaults)?;
    let n = model.coupling.sites().ok_or_else(|| {
        CliError::Config("trajectories need coupling.kind = nn or infinite".into())
    })?;
    let g = model.gamma;
    let cfg = TrajectoryConfig {
        t_final: s.resolve("trajectory.t_final", 400.0)? / g,
        sample_dt: s.resolve("trajectory.sample_dt", 0.1)? / g,
        dt: s.resolve("trajectory.dt", DEFAULT_DT_GAMMA)? / g,
        initial: None,
    };
    let count = s.resolve("trajectory.count", 1usize)?;
    let burn_in = s.resolve("trajectory.burn_in", MIN_BURN_IN)? / g;
    if count == 0 {
        return Err(CliError::Config("trajectory.count must be positive".into()));
    }
    let records = run_ensemble(&model, &cfg, ctx.seed, count)?;
    let mut out = OutDir::create(&ctx.out)?;
    let width = (count - 1).to_string().len();
    for (k, r) in records.iter().enumerate() {
        out.write(&format!("trajectory_{k:0width$}.csv"), &r.to_csv())?;
        out.write(&format!("jumps_{k:0width$}.csv"), &r.jumps_csv())?;
    }

    let mut st = TrajectoryStats {
        n_trajectories: count,
        burn_in: burn_in * g,
        sigma_y_corr: None,
        stderr: None,
        photon_number: None,
        photon_number_se: None,
        dn2_over_n: None,
        dn2_over_n_se: None,
        switching_levels: None,
        tau1: None,
        tau2: None,
        tau1_se: None,
        tau2_se: None,
        gamma_toy: None,
        gamma_toy_se: None,
        n_switches: None,
        notes: Vec::new(),
    };
    let mut failure = None;
    if count >= 2 {
        match ensemble_stats(&records, g, burn_in) {
            Ok(e) => {
                st.sigma_y_corr = Some(e.sigma_y_corr);
                st.stderr = Some(e.stderr);
                st.photon_number = Some(e.photon_number);
                st.photon_number_se = Some(e.photon_number_se);
                st.dn2_over_n = Some(e.dn2_over_n);
                st.dn2_over_n_se = Some(e.dn2_over_n_se);
            }
            Err(e) => {
                st.notes.push(format!("ensemble statistics: {e}"));
                failure = Some(e);
            }
        }
    } else {
        st.notes
            .push("ensemble statistics need at least 2 trajectories".into());
    }
    match switching_levels(&model, n)? {
        Some((lo, hi)) => {
            st.switching_levels = Some([lo, hi]);
            match extract_switching_times_many(&records, lo, hi, g) {
                Ok(SwitchingTimes {
                    tau1,
                    tau2,
                    tau1_se,
                    tau2_se,
                    gamma_toy,
                    gamma_toy_se,
                    n_switches,
                    ..
                }) => {
                    st.tau1 = Some(tau1);
                    st.tau2 = Some(tau2);
                    st.tau1_se = Some(tau1_se);
                    st.tau2_se = Some(tau2_se);
                    st.gamma_toy = Some(gamma_toy);
                    st.gamma_toy_se = Some(gamma_toy_se);
                    st.n_switches = Some(n_switches);
                }
                Err(e) => {
                    st.notes.push(format!("switching: {e}"));
                    if require_switching {
                        failure = Some(e);
                    }
                }
            }
        }
        None => {
            st.notes
                .push("switching: mean field is not bistable here".into());
            if require_switching {
                failure = Some(ddxy::Error::InsufficientStatistics(
                    "mean field is not bistable at these parameters".into(),
                ));
            }
        }
    }
    out.write_json("stats.json", &st)?;
    out.manifest("trajectory", ctx.seed, ctx.threads, s)?;
    match failure {
        Some(e) => Err(e.into()),
        None => Ok(()),
    }
}

pub const GAP_CSV_HEADER: &str = "mu_over_gamma,omega_over_gamma,gap_over_gamma,n_sites";

pub fn gap(ctx: &Context, s: &mut Settings, resume: bool) -> Result<(), CliError> {
    let defaults = ModelParams {
        mu: -5.0,
        omega: 2.5,
        coupling: CouplingSpec::InfiniteRange { n: 20 },
        ..ModelParams::default()
    };
    let model = s.model(&defaults)?;
    let n = model
        .coupling
        .sites()
        .ok_or_else(|| CliError::Config("the gap needs coupling.kind = nn or infinite".into()))?;
    let (mu0, om0) = (model.mu / model.gamma, model.omega / model.gamma);
    let grid = grid(s, "gap", [mu0, mu0, om0, om0], [1, 1])?;
    let chunk = s.resolve("gap.chunk", 16usize)?;
    let solver = s.resolve("gap.solver", "auto".to_string())?;
    let use_permsym = match (solver.as_str(), model.coupling) {
        ("permsym", CouplingSpec::InfiniteRange { .. })
        | ("auto", CouplingSpec::InfiniteRange { .. }) => true,
        ("dense", _) | ("auto", _) => false,
        ("permsym", _) => {
            return Err(CliError::Config(
                "the permutation-symmetric solver needs infinite-range coupling".into(),
            ))
        }
        (other, _) => return Err(CliError::Config(format!("unknown gap.solver {other:?}"))),
    };
    // Surface size and parameter errors before any output is written.
    let probe = if use_permsym {
        ddxy::permsym::enumerate_basis(n).map(|_| ())
    } else {
        ddxy::exact::liouvillian_dense(&model).map(|_| ())
    };
    probe?;
    let mut out = OutDir::create(&ctx.out)?;
    let gamma = model.gamma;
    let computed = chunked_grid(
        &mut out,
        "gap.csv",
        GAP_CSV_HEADER,
        &grid,
        chunk,
        resume,
        |i| {
            let (mu, om) = grid.point(i);
            let p = model.with_drive(mu * gamma, om * gamma);
            let g = if use_permsym {
                ddxy::permsym::liouvillian_gap(&p)
            } else {
                ddxy::exact::liouvillian_gap_dense(&p)
            };
            let v = g
                .map(|r| format!("{:.12e}", r.gap / gamma))
                .unwrap_or_else(|_| "nan".into());
            format!("{},{v},{n}", point_key(mu, om))
        },
    )?;
    eprintln!("gap: {computed} of {} points computed", grid.len());
    out.manifest("gap", ctx.seed, ctx.threads, s)
}

pub fn plot_data(ctx: &Context, s: &mut Settings, kind: &str) -> Result<(), CliError> {
    let mut out = OutDir::create(&ctx.out)?;
    match kind {
        "branches" => {
            let model = s.model(&ModelParams {
                mu: -5.0,
                ..ModelParams::default()
            })?;
            let lo = s.resolve("plot.omega_min", 0.0)?;
            let hi = s.resolve("plot.omega_max", 6.0)?;
            let steps = s.resolve("plot.omega_steps", 601usize)?;
            if steps < 2 || !(hi > lo) {
                return Err(CliError::Config(
                    "branches need omega_max > omega_min and at least 2 steps".into(),
                ));
            }
            let mut csv = String::from("omega_over_gamma,branch,n,sx,sy,sz,stable_at_k0\n");
            for i in 0..steps {
                let om = lo + (hi - lo) * i as f64 / (steps - 1) as f64;
                let p = model.with_drive(model.mu, om * model.gamma);
                for (b, st) in uniform_steady_states(&p)?.iter().enumerate() {
                    let _ = writeln!(
                        csv,
                        "{om},{b},{:.12e},{:.12e},{:.12e},{:.12e},{}",
                        st.photon_number(),
                        st.bloch.x,
                        st.bloch.y,
                        st.bloch.z,
                        st.stable_at_k0
                    );
                }
            }
            out.write("branches.csv", &csv)?;
        }
        "limit-cycle" => {
            let model = s.model(&ModelParams {
                mu: 2.5,
                omega: 6.5,
                ..ModelParams::default()
            })?;
            let t_final = s.resolve("plot.t_final", 600.0)? / model.gamma;
            let two = model.with_coupling(CouplingSpec::MeanFieldZ {
                z: model.coupling.coordination(),
            });
            // Inverted spins with one sublattice tilted off the pole; a uniform
            // start stays uniform and never reaches the AF orbit.
            let start = BlochField::new(vec![Bloch::INVERTED, Bloch::new(0.1, 0.0, 0.99)]);
            let dt = 1e-3 / model.gamma;
            let series = evolve_mf(&start, &two, t_final, dt, 0.01 / model.gamma)?;
            let keep = series.times.len() - series.times.len().min(2000);
            let mut csv = String::from("t,sublattice,sx,sy,sz\n");
            for (t, st) in series.times[keep..].iter().zip(&series.states[keep..]) {
                for (i, b) in st.sites.iter().enumerate() {
                    let _ = writeln!(
                        csv,
                        "{t},{},{:.12e},{:.12e},{:.12e}",
                        if i == 0 { "A" } else { "B" },
                        b.x,
                        b.y,
                        b.z
                    );
                }
            }
            out.write("limit_cycle.csv", &csv)?;
        }
        "chain-profile" => {
            let model = s.model(&ModelParams {
                mu: 10.0,
                omega: 6.0,
                ..ModelParams::default()
            })?;
            let sites = s.resolve("plot.sites", 64usize)?;
            let t_final = s.resolve("plot.t_final", 300.0)? / model.gamma;
            let chain = model.with_coupling(CouplingSpec::NearestNeighbor1D {
                n: sites,
                periodic: true,
            });
            let r = inhomogeneous_chain_steady(&chain, ctx.seed, t_final, 1e-3 / model.gamma)?;
            out.write("chain_profile.csv", &r.profile_csv())?;
            out.write_json("chain_profile.json", &serde_json::json!({ "convergence": r.convergence, "af_fraction": r.af_fraction(), "domains": r.domains }))?;
        }
        other => {
            return Err(CliError::Config(format!(
                "unknown plot-data kind {other:?} (branches, limit-cycle, chain-profile)"
            )))
        }
    }
    out.manifest(&format!("plot-data-{kind}"), ctx.seed, ctx.threads, s)
}
