use std::fmt::Write as _;
use std::fs::File;
use std::io::BufReader;
use std::sync::Arc;

use num_complex::Complex64;
use quasispec_core::perturb::build_partition_with;
use quasispec_core::{
    build_fepsn, coupling_integral, energy_grid, ensure_aperiodic, estimate_mr, itinerary_symbols, l1_distance,
    m_plus, semicontinuity_experiment, sup_distance, sweep_curve, verify_construction, AperiodicityAdjustment,
    BoxStep, LyapunovParams, MParams, PieceSequence, SamplingFunction, SemicontinuityParams,
};
use rayon::prelude::*;
use serde_json::json;

use crate::artifacts::{num, Artifacts};
use crate::config::{ExperimentConfig, MollifySource};
use crate::Failure;

pub fn lyapunov(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let e = &cfg.energy;
    let grid = energy_grid(e.min, e.max, e.count, e.shift)?;
    let curve = sweep_curve(&cfg.f, &cfg.flow, &grid, cfg.lyapunov.method, &cfg.lyapunov.params())?;
    let failed = curve.points.iter().filter(|p| p.estimate.is_none()).count();
    out.write_csv("lyapunov.csv", &curve.to_csv())?;
    println!("lyapunov: {} energies, {failed} failed", grid.len());
    Ok(())
}

pub fn mfun(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let m = &cfg.mfun;
    let energy = Complex64::new(m.energy_re, m.energy_im);
    let params = MParams {
        horizon: m.horizon,
        step: m.step,
        tol: m.tol,
    };
    let omegas = cfg.lyapunov.params().omegas(cfg.flow.dim())?;
    let values = omegas
        .par_iter()
        .map(|w| m_plus(&cfg.f, &cfg.flow.with_omega(w.clone()), energy, &params))
        .collect::<Result<Vec<_>, _>>()?;

    let mut csv = String::new();
    for j in 1..=cfg.flow.dim() {
        let _ = write!(csv, "omega_{j},");
    }
    csv.push_str("E_re,E_im,m_re,m_im,error_estimate,X\n");
    for (w, v) in omegas.iter().zip(&values) {
        for c in w.coords() {
            let _ = write!(csv, "{},", num(*c));
        }
        let _ = writeln!(
            csv,
            "{},{},{},{},{},{}",
            num(v.energy.re),
            num(v.energy.im),
            num(v.m.re),
            num(v.m.im),
            num(v.error_estimate),
            num(v.horizon)
        );
    }
    out.write_csv("mfun.csv", &csv)?;
    println!("mfun: {} base points at E = {energy}", values.len());
    Ok(())
}

pub fn mr(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let est = estimate_mr(&cfg.f, &cfg.flow, cfg.mr.r, cfg.mr.tau, cfg.mr.grid_n, &cfg.lyapunov.params())?;
    out.write_json_value(
        "mr.json",
        json!({
            "R": est.r,
            "tau": est.tau,
            "grid_n": est.grid_n,
            "measure": est.measure,
            "failures": est.failures,
            "flags": "mr_flags.csv",
        }),
    )?;
    out.write_csv("mr_flags.csv", &est.flags_csv())?;
    println!("mr: M_R = {} on [-{}, {}]", est.measure, est.r, est.r);
    Ok(())
}

pub fn coupling(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let c = &cfg.coupling;
    let est = coupling_integral(
        &cfg.f,
        &cfg.flow,
        cfg.mr.r,
        c.lambda_max,
        c.lambda_n,
        cfg.mr.tau,
        cfg.mr.grid_n,
        &cfg.lyapunov.params(),
    )?;
    let mut csv = String::from("lambda,measure,failures\n");
    for (lam, node) in est.lambda_nodes.iter().zip(&est.per_node) {
        let _ = writeln!(csv, "{},{},{}", num(*lam), num(node.measure), node.failures);
    }
    out.write_json_value(
        "coupling.json",
        json!({
            "R": cfg.mr.r,
            "tau": cfg.mr.tau,
            "grid_n": cfg.mr.grid_n,
            "Lambda": est.lambda_max,
            "lambda_n": c.lambda_n,
            "lambda_nodes": est.lambda_nodes,
            "measures": est.per_node.iter().map(|m| m.measure).collect::<Vec<_>>(),
            "integral": est.integral,
        }),
    )?;
    out.write_csv("coupling.csv", &csv)?;
    println!("coupling: integral = {} over [0, {}]", est.integral, est.lambda_max);
    Ok(())
}

struct Construction {
    f: SamplingFunction,
    adjustment: Option<AperiodicityAdjustment>,
    fepsn: BoxStep,
}

fn construct(cfg: &ExperimentConfig) -> Result<Construction, Failure> {
    let pc = &cfg.perturb;
    let (f, adjustment) = if pc.adjust_aperiodic {
        ensure_aperiodic(&cfg.f, cfg.flow.dim(), pc.eps)?
    } else {
        (cfg.f.clone(), None)
    };
    let partition = build_partition_with(&f, &cfg.flow, pc.eps, pc.n, pc.scan_points)?;
    let fepsn = build_fepsn(&f, &partition, pc.eps, pc.n)?;
    Ok(Construction { f, adjustment, fepsn })
}

pub fn perturb(cfg: &ExperimentConfig, fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let pc = &cfg.perturb;
    let c = construct(cfg)?;
    let report = verify_construction(&c.f, &c.fepsn, &cfg.flow, pc.eps, pc.n, &pc.verify_params())?;
    let step = SamplingFunction::BoxStep(Arc::new(c.fepsn.clone()));
    let sup_to_original = sup_distance(&cfg.f, &step, cfg.flow.dim(), pc.sup_grid)?;
    let it = itinerary_symbols(&c.fepsn, &cfg.flow, pc.symbols)?;

    out.write_json_value(
        "perturb_report.json",
        json!({
            "all_pass": report.all_pass(),
            "box_count": c.fepsn.partition().box_count(),
            "amp": c.fepsn.amp(),
            "aperiodicity_adjustment": c.adjustment,
            "sup_to_original": sup_to_original,
            "report": report,
        }),
    )?;
    let export = serde_json::to_value(c.fepsn.export()).expect("partition serializes");
    out.write_json_value("partition.json", export)?;
    out.write_bytes("itinerary.jsonl", &stamped_jsonl(&it.sequence, fp)?)?;

    let passed = report.checks.iter().filter(|c| c.pass).count();
    println!(
        "perturb: {} boxes, {passed}/{} checks pass",
        c.fepsn.partition().box_count(),
        report.checks.len()
    );
    for check in &report.checks {
        println!("  {:<28} {}", check.name, if check.pass { "pass" } else { "FAIL" });
    }
    Ok(())
}

/// JSONL itinerary whose header line also carries the fingerprint.
fn stamped_jsonl(seq: &PieceSequence, fingerprint: &str) -> Result<Vec<u8>, Failure> {
    let mut buf = Vec::new();
    seq.write_jsonl(&mut buf)?;
    let split = buf.iter().position(|&b| b == b'\n').unwrap_or(buf.len());
    let mut header: serde_json::Value =
        serde_json::from_slice(&buf[..split]).map_err(|e| Failure::Io(e.to_string()))?;
    header["config_fingerprint"] = serde_json::Value::String(fingerprint.to_string());
    let mut stamped = serde_json::to_vec(&header).expect("json serializes");
    stamped.extend_from_slice(&buf[split..]);
    Ok(stamped)
}

pub fn pieces(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let pc = &cfg.pieces;
    let seq = match &pc.input {
        Some(path) => {
            let file = File::open(path).map_err(|e| Failure::Config(format!("cannot open {path}: {e}")))?;
            PieceSequence::read_jsonl(BufReader::new(file))?
        }
        None => itinerary_symbols(&construct(cfg)?.fepsn, &cfg.flow, cfg.perturb.symbols)?.sequence,
    };
    let prefix = pc.prefix.unwrap_or(seq.len());
    if prefix > seq.len() {
        return Err(Failure::Config(format!("prefix {prefix} exceeds {} symbols", seq.len())));
    }
    let head = PieceSequence::new(seq.alphabet().clone(), seq.symbols()[..prefix].to_vec(), seq.start_offset())?;
    let longest = head
        .symbols()
        .iter()
        .map(|&s| head.alphabet().pieces()[s].duration)
        .fold(0.0f64, f64::max);
    let ell = pc.ell.unwrap_or(pc.ell_factor * longest);

    let fdp = head.check_fdp();
    let forward = head.check_simple_fdp(ell, prefix)?;
    let reversed = if pc.reversed {
        Some(head.reverse().check_simple_fdp(ell, prefix)?)
    } else {
        None
    };
    let periodicity = head.falsify_eventual_periodicity(pc.max_period)?;

    out.write_json_value(
        "pieces_report.json",
        json!({
            "symbols": prefix,
            "alphabet_size": head.alphabet().len(),
            "ell": ell,
            "fdp": fdp,
            "simple_fdp_forward": forward,
            "simple_fdp_reversed": reversed,
            "periodicity": periodicity,
        }),
    )?;
    println!(
        "pieces: {prefix} symbols, fdp {}, simple fdp forward {}, reversed {}, eventual periodicity {}",
        verdict(fdp.pass),
        verdict(forward.holds()),
        reversed.as_ref().map_or("skipped", |v| verdict(v.holds())),
        if periodicity.is_falsified() { "falsified" } else { "not excluded" }
    );
    Ok(())
}

fn verdict(pass: bool) -> &'static str {
    if pass {
        "holds"
    } else {
        "violated"
    }
}

pub fn mollify(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let mc = &cfg.mollify;
    let d = cfg.flow.dim();
    let source = match mc.source {
        MollifySource::F => cfg.f.clone(),
        MollifySource::Fepsn => SamplingFunction::BoxStep(Arc::new(construct(cfg)?.fepsn)),
    };
    let mut csv = String::from("eps_m,l1_to_source,sup_to_source,sup_to_f\n");
    for &scale in &mc.scales {
        let g = source.mollify(scale, mc.order)?;
        let l1 = l1_distance(&g, &source, d, mc.distance_grid)?;
        let sup_src = sup_distance(&g, &source, d, mc.distance_grid)?;
        let sup_f = sup_distance(&g, &cfg.f, d, mc.distance_grid)?;
        let _ = writeln!(csv, "{},{},{},{}", num(scale), num(l1), num(sup_src), num(sup_f));
    }
    out.write_csv("mollify.csv", &csv)?;
    println!("mollify: {} scales", mc.scales.len());
    Ok(())
}

pub fn demo_semicontinuity(cfg: &ExperimentConfig, _fp: &str, out: &mut Artifacts) -> Result<(), Failure> {
    let sc = &cfg.semicontinuity;
    let c = construct(cfg)?;
    let f_tilde = SamplingFunction::BoxStep(Arc::new(c.fepsn));
    let params = SemicontinuityParams {
        scales: sc.scales.clone(),
        quadrature_order: sc.order,
        r: cfg.mr.r,
        tau: cfg.mr.tau,
        grid_n: sc.grid_n,
        distance_grid: sc.distance_grid,
        coupling: sc
            .include_coupling
            .then_some((cfg.coupling.lambda_max, cfg.coupling.lambda_n)),
        lyapunov: LyapunovParams {
            horizon: sc.horizon,
            step: sc.step,
            omega_count: sc.omega_count,
            ..cfg.lyapunov.params()
        },
    };
    let report = semicontinuity_experiment(&f_tilde, &cfg.f, &cfg.flow, &params)?;
    out.write_csv("semicontinuity.csv", &report.to_csv())?;
    out.write_json_value("semicontinuity.json", json!({ "params": params, "rows": report.rows }))?;
    println!("demo-semicontinuity: {} scales tabulated; inspection only, no spectral conclusion is drawn", report.rows.len());
    Ok(())
}
