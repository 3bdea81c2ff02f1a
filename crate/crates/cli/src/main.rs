mod inputs;

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use mmlimit::approx::{
    glue, quasi_inverse, rough_inverse_weak, search_weak_approximation, verify_approximation, verify_weak_approximation,
    weak_residuals, EpsGrid, SearchConfig, WeakApprox,
};
use mmlimit::category::{check_system, direct_limit_stage, direct_limit_stability, inverse_limit_stage, SystemKind, SystemOfSpaces};
use mmlimit::convergence::{bmttb_check, tangent_sequence, uniform_bounded_finiteness, wpmgh_sequence_check};
use mmlimit::gallery;
use mmlimit::io::{DistDoc, Entry, Manifest, ManifestKind, MeasureDoc, MeasuresManifest, SpaceDoc};
use mmlimit::mmspace::{validate_space, PointMap};
use mmlimit::weaklimit::{delta_matrix, is_asymptotically_cauchy, lift_measure, prokhorov_tightness, LiftStage};
use mmlimit::{Evidence, MmError, Verdict};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::inputs::{family, sha256_hex, Inputs};

#[derive(Debug)]
pub enum CliError {
    Io(String),
    Input(String),
    Domain(MmError),
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "io error: {m}"),
            CliError::Input(m) => write!(f, "invalid input: {m}"),
            CliError::Domain(e) => write!(f, "{e}"),
        }
    }
}

impl From<MmError> for CliError {
    fn from(e: MmError) -> Self {
        CliError::Domain(e)
    }
}

/// Process outcome; ordered so that the worst of several wins.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Outcome {
    Pass,
    Inconclusive,
    Fail,
}

impl Outcome {
    fn code(self) -> u8 {
        match self {
            Outcome::Pass => 0,
            Outcome::Fail => 1,
            Outcome::Inconclusive => 2,
        }
    }

    fn of_verdict(v: &Verdict) -> Self {
        if v.is_pass() {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }

    fn of_evidence(e: Evidence) -> Self {
        match e {
            Evidence::PassEvidence => Outcome::Pass,
            Evidence::FailCertified => Outcome::Fail,
            Evidence::Inconclusive => Outcome::Inconclusive,
        }
    }
}

const EXIT_USAGE: u8 = 3;

#[derive(Parser, Debug)]
#[command(name = "mmlimit", version, about = "Approximations, weak limits and categorical limits of finite pointed metric measure spaces")]
struct Cli {
    /// Seed for every randomized search.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Depth of the test-function family.
    #[arg(long, global = true, default_value_t = 3)]
    depth: u32,
    /// Local-search budget.
    #[arg(long, global = true, default_value_t = 10_000)]
    budget: usize,
    #[arg(long, global = true, default_value_t = 1e-9)]
    tol: f64,
    /// Report file (JSON lines); standard output when absent. For `gen`, the generated document.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// First value of the ε grid (default: half the larger diameter).
    #[arg(long, global = true)]
    eps_start: Option<f64>,
    #[arg(long, global = true, default_value_t = 1e-6)]
    eps_floor: f64,
    #[arg(long, global = true, default_value_t = 0.9)]
    eps_ratio: f64,
    /// Plot data side channel for `seq` commands.
    #[arg(long, global = true)]
    csv: Option<PathBuf>,
    /// Directory caching test families by space hash and depth.
    #[arg(long, global = true)]
    cache_dir: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum Cmd {
    /// Check a space document and list every violated axiom.
    Validate { space: PathBuf },
    /// Write a gallery space, system or measure sequence.
    #[command(subcommand)]
    Gen(GenCmd),
    /// Verify, invert, search for and glue approximations.
    #[command(subcommand)]
    Approx(ApproxCmd),
    /// δ distances, Cauchy tails, tightness and lifting of measures.
    #[command(subcommand)]
    Measures(MeasuresCmd),
    /// Compactness and convergence checks on space sequences.
    #[command(subcommand)]
    Seq(SeqCmd),
    /// Stage-wise direct and inverse limits of a system.
    #[command(subcommand)]
    Limit(LimitCmd),
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum GenCmd {
    Simplex {
        #[arg(long)]
        i: usize,
        /// Emit the sequence of simplices 1..=i as a manifest.
        #[arg(long)]
        sequence: bool,
    },
    InverseExample {
        #[arg(long)]
        i_max: usize,
        #[arg(long)]
        k: usize,
    },
    Prokhorov {
        #[arg(long)]
        j: usize,
        #[arg(long)]
        n: usize,
    },
    Grid {
        #[arg(long)]
        points: usize,
        #[arg(long, default_value_t = 1.0)]
        extent: f64,
    },
    MergingChain,
    RandomDirect {
        #[arg(long, default_value_t = 4)]
        stages: usize,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum ApproxCmd {
    /// Verify a strict approximation, or a weak one when the document has `good`.
    Verify { src: PathBuf, dst: PathBuf, approx: PathBuf },
    /// Quasi-inverse of a strict approximation, rough inverse of a weak one.
    Invert { src: PathBuf, dst: PathBuf, approx: PathBuf },
    Search {
        src: PathBuf,
        dst: PathBuf,
        #[arg(long = "radius")]
        radius: f64,
        /// One JSON line per accepted local-search move.
        #[arg(long)]
        #[serde(skip)]
        trace: Option<PathBuf>,
    },
    Glue { src: PathBuf, dst: PathBuf, approx: PathBuf },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum MeasuresCmd {
    Delta { manifest: PathBuf },
    Cauchy {
        manifest: PathBuf,
        /// Schedule of ε values (default: the global tolerance).
        #[arg(long, value_delimiter = ',', value_parser = parse_real)]
        schedule: Vec<f64>,
    },
    Tight {
        manifest: PathBuf,
        #[arg(long)]
        eps: f64,
        #[arg(long)]
        radius: Option<f64>,
    },
    Lift { manifest: PathBuf },
}

#[derive(Args, Debug, Serialize)]
struct TripleArgs {
    /// `R,r,eps` triples.
    #[arg(long = "params", value_parser = parse_triple, required = true)]
    params: Vec<(f64, f64, f64)>,
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum SeqCmd {
    Ubf {
        manifest: PathBuf,
        #[arg(long, value_delimiter = ',', value_parser = parse_real, required = true)]
        radii: Vec<f64>,
    },
    Bmttb {
        manifest: PathBuf,
        #[command(flatten)]
        triples: TripleArgs,
    },
    Wpmgh {
        manifest: PathBuf,
        #[arg(long)]
        limit: PathBuf,
        /// `R,eps` per space.
        #[arg(long = "stage", value_parser = parse_pair, required = true)]
        schedule: Vec<(f64, f64)>,
    },
    Tangent {
        space: PathBuf,
        /// Point index (default: the basepoint).
        #[arg(long)]
        point: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_real, required = true)]
        scales: Vec<f64>,
        #[command(flatten)]
        triples: TripleArgs,
        /// Restrict each rescaled space to the ball of this many scales.
        #[arg(long)]
        window: Option<f64>,
    },
}

#[derive(Subcommand, Debug, Serialize)]
#[serde(rename_all = "kebab-case")]
enum LimitCmd {
    Direct {
        manifest: PathBuf,
        #[arg(long)]
        stage: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_real)]
        radii: Vec<f64>,
    },
    Inverse {
        manifest: PathBuf,
        #[arg(long)]
        stage: Option<usize>,
        #[arg(long, value_delimiter = ',', value_parser = parse_real)]
        radii: Vec<f64>,
        /// Include per-thread ball-mass columns.
        #[arg(long)]
        thread_columns: bool,
        /// Include the projections from the limit to every stage.
        #[arg(long)]
        projections: bool,
    },
}

fn parse_floats(s: &str, k: usize) -> Result<Vec<f64>, String> {
    let v: Vec<f64> = s.split(',').map(|x| parse_real(x.trim())).collect::<Result<_, _>>()?;
    if v.len() != k {
        return Err(format!("expected {k} comma-separated numbers, got {s:?}"));
    }
    Ok(v)
}

/// Reals, also as `p/q` fractions.
fn parse_real(s: &str) -> Result<f64, String> {
    match s.split_once('/') {
        Some((p, q)) => {
            let p: f64 = p.parse().map_err(|_| format!("bad number {s:?}"))?;
            let q: f64 = q.parse().map_err(|_| format!("bad number {s:?}"))?;
            Ok(p / q)
        }
        None => s.parse().map_err(|_| format!("bad number {s:?}")),
    }
}

fn parse_triple(s: &str) -> Result<(f64, f64, f64), String> {
    let v = parse_floats(s, 3)?;
    Ok((v[0], v[1], v[2]))
}

fn parse_pair(s: &str) -> Result<(f64, f64), String> {
    let v = parse_floats(s, 2)?;
    Ok((v[0], v[1]))
}

#[derive(Serialize)]
struct RunConfig {
    seed: u64,
    fam_depth: u32,
    eps_grid: EpsGrid,
    budget: usize,
    tol: f64,
}

/// A strict approximation document: `{"img", "R", "eps"}`.
#[derive(Deserialize)]
struct StrictDoc {
    img: Vec<usize>,
    #[serde(rename = "R")]
    radius: f64,
    eps: f64,
}

enum ApproxDoc {
    Strict(StrictDoc),
    Weak(WeakApprox),
}

fn load_approx(inputs: &mut Inputs, path: &Path) -> Result<ApproxDoc, CliError> {
    let v: Value = inputs.json(path)?;
    let bad = |e: serde_json::Error| CliError::Input(format!("{}: {e}", path.display()));
    if v.get("good").is_some() {
        Ok(ApproxDoc::Weak(serde_json::from_value(v).map_err(bad)?))
    } else {
        Ok(ApproxDoc::Strict(serde_json::from_value(v).map_err(bad)?))
    }
}

struct Run<'a> {
    cli: &'a Cli,
    inputs: Inputs,
    lines: Vec<Value>,
    csv: Vec<String>,
}

impl Run<'_> {
    fn emit(&mut self, v: Value) {
        self.lines.push(v);
    }

    fn search_config(&self) -> SearchConfig {
        SearchConfig {
            budget: self.cli.budget,
            seed: self.cli.seed,
            grid: EpsGrid { start: self.cli.eps_start, floor: self.cli.eps_floor, ratio: self.cli.eps_ratio },
            trace: false,
        }
    }
}

fn to_value<T: Serialize>(t: &T) -> Value {
    serde_json::to_value(t).expect("reports serialize")
}

fn write_file(path: &Path, text: &str) -> Result<(), CliError> {
    fs::write(path, text).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn system_from_manifest(m: &Manifest, spaces: Vec<mmlimit::mmspace::PointedSpace>) -> Result<SystemOfSpaces, CliError> {
    let kind = match m.kind {
        ManifestKind::Direct => SystemKind::Direct,
        ManifestKind::Inverse => SystemKind::Inverse,
        ManifestKind::Sequence => return Err(CliError::Input("manifest kind must be direct or inverse".into())),
    };
    Ok(SystemOfSpaces::new(kind, spaces, m.bond_maps())?)
}

fn system_manifest(sys: &SystemOfSpaces) -> Manifest {
    Manifest {
        kind: match sys.kind {
            SystemKind::Direct => ManifestKind::Direct,
            SystemKind::Inverse => ManifestKind::Inverse,
        },
        spaces: sys.spaces.iter().map(|s| Entry::Inline(SpaceDoc::from_space(s))).collect(),
        bonds: sys.bonds.iter().map(|b| mmlimit::io::BondDoc { img: b.img.clone() }).collect(),
    }
}

fn generate(run: &mut Run, cmd: &GenCmd) -> Result<Outcome, CliError> {
    let doc: Value = match *cmd {
        GenCmd::Simplex { i, sequence: false } => to_value(&SpaceDoc::from_space(&gallery::gen_uniform_simplex(i)?)),
        GenCmd::Simplex { i, sequence: true } => {
            let spaces = (1..=i)
                .map(|k| Ok(Entry::Inline(SpaceDoc::from_space(&gallery::gen_uniform_simplex(k)?))))
                .collect::<Result<_, MmError>>()?;
            to_value(&Manifest { kind: ManifestKind::Sequence, spaces, bonds: vec![] })
        }
        GenCmd::InverseExample { i_max, k } => to_value(&system_manifest(&gallery::gen_inverse_example(i_max, k)?)),
        GenCmd::Prokhorov { j, n } => {
            let (host, seq) = gallery::gen_prokhorov_sharp(j, n)?;
            to_value(&MeasuresManifest {
                host: Entry::Inline(SpaceDoc::from_space(&host)),
                measures: seq.iter().map(|m| Entry::Inline(MeasureDoc::from(m))).collect(),
            })
        }
        GenCmd::Grid { points, extent } => {
            let g = gallery::gen_doubling_grid(points, extent)?;
            // The line-grid generator keeps large grids compact.
            to_value(&SpaceDoc {
                n: g.n(),
                labels: None,
                dist: DistDoc::Generated { generator: "line_grid".into(), params: json!({ "step": extent / (points - 1) as f64 }) },
                weight: g.weights().to_vec(),
                base: g.base(),
            })
        }
        GenCmd::MergingChain => to_value(&system_manifest(&gallery::gen_merging_chain()?)),
        GenCmd::RandomDirect { stages } => to_value(&system_manifest(&gallery::random_direct_system(run.cli.seed, stages)?)),
    };
    let text = serde_json::to_string(&doc).expect("documents serialize") + "\n";
    run.emit(json!({ "generated": to_value(cmd), "sha256": sha256_hex(text.as_bytes()) }));
    match &run.cli.out {
        Some(p) => write_file(p, &text)?,
        None => print!("{text}"),
    }
    Ok(Outcome::Pass)
}

fn approx(run: &mut Run, cmd: &ApproxCmd) -> Result<Outcome, CliError> {
    match cmd {
        ApproxCmd::Verify { src, dst, approx } => {
            let (x, y) = (run.inputs.space(src)?, run.inputs.space(dst)?);
            match load_approx(&mut run.inputs, approx)? {
                ApproxDoc::Strict(a) => {
                    let v = verify_approximation(&x, &y, &PointMap::new(a.img), a.radius, a.eps)?;
                    run.emit(json!({ "check": "strict", "R": a.radius, "eps": a.eps, "result": v }));
                    Ok(Outcome::of_verdict(&v))
                }
                ApproxDoc::Weak(w) => {
                    let v = verify_weak_approximation(&x, &y, &w)?;
                    let (bad_src, bad_dst) = weak_residuals(&x, &y, &w);
                    run.emit(json!({ "check": "weak", "R": w.radius, "eps": w.eps, "exceptional_mass": bad_src, "uncovered_mass": bad_dst, "result": v }));
                    Ok(Outcome::of_verdict(&v))
                }
            }
        }
        ApproxCmd::Invert { src, dst, approx } => {
            let (x, y) = (run.inputs.space(src)?, run.inputs.space(dst)?);
            match load_approx(&mut run.inputs, approx)? {
                ApproxDoc::Strict(a) => {
                    let inv = quasi_inverse(&x, &y, &PointMap::new(a.img), a.radius, a.eps, None)?;
                    let (r, e) = (a.radius - a.eps, 3.0 * a.eps);
                    let v = verify_approximation(&y, &x, &inv, r, e)?;
                    run.emit(json!({ "inverse": { "img": inv.img, "R": r, "eps": e }, "result": v }));
                    Ok(Outcome::of_verdict(&v))
                }
                ApproxDoc::Weak(w) => {
                    let inv = rough_inverse_weak(&x, &y, &w, None)?;
                    let v = verify_weak_approximation(&y, &x, &inv)?;
                    run.emit(json!({ "inverse": inv, "result": v }));
                    Ok(Outcome::of_verdict(&v))
                }
            }
        }
        ApproxCmd::Search { src, dst, radius, trace } => {
            let (x, y) = (run.inputs.space(src)?, run.inputs.space(dst)?);
            let mut cfg = run.search_config();
            cfg.trace = trace.is_some();
            let out = search_weak_approximation(&x, &y, *radius, &cfg)?;
            if let Some(path) = trace {
                let text: String = out.trace.iter().map(|t| serde_json::to_string(t).expect("trace serializes") + "\n").collect();
                write_file(path, &text)?;
            }
            run.emit(json!({
                "witness": out.witness,
                "achieved_eps": out.achieved_eps,
                "verified": out.verified,
                "score": out.score,
                "trace_events": out.trace.len(),
            }));
            Ok(if out.verified { Outcome::Pass } else { Outcome::Inconclusive })
        }
        ApproxCmd::Glue { src, dst, approx } => {
            let (x, y) = (run.inputs.space(src)?, run.inputs.space(dst)?);
            let ApproxDoc::Weak(w) = load_approx(&mut run.inputs, approx)? else {
                return Err(CliError::Input("gluing needs a weak approximation document with `good`".into()));
            };
            let g = glue(&x, &y, &w)?;
            let report = validate_space(&g.space);
            run.emit(json!({
                "space": SpaceDoc::from_space(&g.space),
                "embed_x": g.embed_x.img,
                "embed_y": g.embed_y.img,
                "violations": report.violations,
            }));
            Ok(if report.is_valid() { Outcome::Pass } else { Outcome::Fail })
        }
    }
}

fn measures(run: &mut Run, cmd: &MeasuresCmd) -> Result<Outcome, CliError> {
    let cache = run.cli.cache_dir.clone();
    match cmd {
        MeasuresCmd::Delta { manifest } => {
            let (host, seq) = run.inputs.measures(manifest)?;
            let fam = family(&host, run.cli.depth, cache.as_deref())?;
            let d = delta_matrix(&seq, &fam)?;
            run.emit(json!({ "family_len": fam.len(), "delta": d }));
            Ok(Outcome::Pass)
        }
        MeasuresCmd::Cauchy { manifest, schedule } => {
            let (host, seq) = run.inputs.measures(manifest)?;
            let fam = family(&host, run.cli.depth, cache.as_deref())?;
            let schedule = if schedule.is_empty() { vec![run.cli.tol] } else { schedule.clone() };
            let r = is_asymptotically_cauchy(&seq, &fam, &schedule)?;
            let o = Outcome::of_verdict(&r.verdict);
            run.emit(json!({ "family_len": fam.len(), "schedule": schedule, "report": r }));
            Ok(o)
        }
        MeasuresCmd::Tight { manifest, eps, radius } => {
            let (host, seq) = run.inputs.measures(manifest)?;
            let r = prokhorov_tightness(&host, &seq, *eps, *radius)?;
            let o = Outcome::of_verdict(&r.verdict);
            run.emit(to_value(&r));
            Ok(o)
        }
        MeasuresCmd::Lift { manifest } => {
            let (m, target, spaces) = run.inputs.lift(manifest)?;
            let maps: Vec<PointMap> = m.stages.iter().map(|s| PointMap::new(s.img.clone())).collect();
            let stages: Vec<LiftStage> = spaces
                .iter()
                .zip(&maps)
                .zip(&m.stages)
                .map(|((space, map), s)| LiftStage { space, map, radius: s.radius, eps: s.eps })
                .collect();
            let r = lift_measure(&stages, &target, None, run.cli.tol)?;
            let o = if r.unrepresented.is_empty() { Outcome::Pass } else { Outcome::Inconclusive };
            run.emit(to_value(&r));
            Ok(o)
        }
    }
}

fn seq(run: &mut Run, cmd: &SeqCmd) -> Result<Outcome, CliError> {
    match cmd {
        SeqCmd::Ubf { manifest, radii } => {
            let (_, spaces) = run.inputs.manifest(manifest)?;
            let p = uniform_bounded_finiteness(&spaces, radii)?;
            run.csv.push("radius,stage,mass".into());
            for (k, r) in radii.iter().enumerate() {
                for (i, row) in p.table.iter().enumerate() {
                    run.csv.push(format!("{r},{i},{}", row[k]));
                }
            }
            run.emit(to_value(&p));
            Ok(Outcome::Pass)
        }
        SeqCmd::Bmttb { manifest, triples } => {
            let (_, spaces) = run.inputs.manifest(manifest)?;
            let out = bmttb_check(&spaces, &triples.params)?;
            Ok(emit_bmttb(run, &out, true))
        }
        SeqCmd::Wpmgh { manifest, limit, schedule } => {
            let (_, spaces) = run.inputs.manifest(manifest)?;
            let limit = run.inputs.space(limit)?;
            let cfg = run.search_config();
            let r = wpmgh_sequence_check(&spaces, &limit, schedule, run.cli.depth, run.cli.tol, &cfg)?;
            let o = Outcome::of_verdict(&r.verdict);
            run.emit(to_value(&r));
            Ok(o)
        }
        SeqCmd::Tangent { space, point, scales, triples, window } => {
            let s = run.inputs.space(space)?;
            let point = point.unwrap_or(s.base());
            let r = tangent_sequence(&s, point, scales, &triples.params, *window)?;
            run.emit(json!({ "point": point, "doubling": r.doubling }));
            run.csv.push("scale,ratio".into());
            for (sc, ra) in r.doubling.scales.iter().zip(&r.doubling.ratios) {
                run.csv.push(format!("{sc},{ra}"));
            }
            let mut o = emit_bmttb(run, &r.bmttb, false);
            if r.doubling.summary_max.is_infinite() {
                o = o.max(Outcome::Inconclusive);
            }
            Ok(o)
        }
    }
}

fn emit_bmttb(run: &mut Run, triples: &[mmlimit::convergence::BmttbTriple], csv: bool) -> Outcome {
    let mut o = Outcome::Pass;
    if csv {
        run.csv.push("triple,stage,M,residual".into());
    }
    for (t, b) in triples.iter().enumerate() {
        o = o.max(Outcome::of_evidence(b.evidence));
        let certificate = b.certified_at.map(|i| json!({ "space": i, "M": b.m_head, "certificate": b.covers[i].certificate }));
        if csv {
            for (i, c) in b.covers.iter().enumerate() {
                run.csv.push(format!("{t},{i},{},{}", c.m, c.residual_mass));
            }
        }
        run.emit(json!({
            "R": b.radius, "r": b.r, "eps": b.eps,
            "M": b.covers.iter().map(|c| c.m).collect::<Vec<_>>(),
            "residual": b.covers.iter().map(|c| c.residual_mass).collect::<Vec<_>>(),
            "m_sup": b.m_sup, "m_head": b.m_head, "tail_residual": b.tail_residual,
            "evidence": b.evidence, "result": b.verdict, "certified": certificate,
        }));
    }
    o
}

fn limit(run: &mut Run, cmd: &LimitCmd) -> Result<Outcome, CliError> {
    match cmd {
        LimitCmd::Direct { manifest, stage, radii } => {
            let (m, spaces) = run.inputs.manifest(manifest)?;
            let sys = system_from_manifest(&m, spaces)?;
            if sys.kind != SystemKind::Direct {
                return Err(CliError::Input("manifest is not a direct system".into()));
            }
            let n = stage.unwrap_or(sys.len());
            let check = check_system(&sys.prefix(n)?)?;
            run.emit(json!({ "system": check.verdict }));
            if !check.verdict.is_pass() {
                return Ok(Outcome::Fail);
            }
            let lim = direct_limit_stage(&sys, n, run.cli.tol, radii)?;
            let stable = if n < sys.len() { Some(direct_limit_stability(&sys, n, run.cli.tol)?) } else { None };
            let o = Outcome::of_evidence(lim.report.existence);
            run.emit(json!({
                "stage": n,
                "limit": SpaceDoc::from_space(&lim.space),
                "maps_into_limit": lim.maps_into_limit.iter().map(|f| &f.img).collect::<Vec<_>>(),
                "stable_to_next_stage": stable,
                "report": lim.report,
            }));
            Ok(o)
        }
        LimitCmd::Inverse { manifest, stage, radii, thread_columns, projections } => {
            let (m, spaces) = run.inputs.manifest(manifest)?;
            let sys = system_from_manifest(&m, spaces)?;
            if sys.kind != SystemKind::Inverse {
                return Err(CliError::Input("manifest is not an inverse system".into()));
            }
            let n = stage.unwrap_or(sys.len());
            let check = check_system(&sys.prefix(n)?)?;
            run.emit(json!({ "system": check.verdict }));
            let lim = inverse_limit_stage(&sys, n, run.cli.tol, radii, *thread_columns)?;
            let o = Outcome::of_evidence(lim.report.existence);
            run.emit(json!({
                "stage": n,
                "limit": lim.space.as_ref().map(SpaceDoc::from_space),
                "projections": projections.then(|| lim.projections.iter().map(|f| &f.img).collect::<Vec<_>>()),
                "report": lim.report,
            }));
            Ok(o)
        }
    }
}

fn dispatch(run: &mut Run) -> Result<Outcome, CliError> {
    let cli = run.cli;
    match &cli.cmd {
        Cmd::Validate { space } => {
            let s = run.inputs.space(space)?;
            let report = validate_space(&s);
            for v in &report.violations {
                run.emit(to_value(v));
            }
            Ok(if report.is_valid() { Outcome::Pass } else { Outcome::Fail })
        }
        Cmd::Gen(g) => generate(run, g),
        Cmd::Approx(a) => approx(run, a),
        Cmd::Measures(m) => measures(run, m),
        Cmd::Seq(s) => seq(run, s),
        Cmd::Limit(l) => limit(run, l),
    }
}

fn configure_threads() -> Result<(), CliError> {
    if let Ok(v) = std::env::var("MMLIMIT_THREADS") {
        let n: usize = v.trim().parse().map_err(|_| CliError::Input(format!("MMLIMIT_THREADS must be a positive integer, got {v:?}")))?;
        if n == 0 {
            return Err(CliError::Input("MMLIMIT_THREADS must be positive".into()));
        }
        // A pool that is already built keeps its size; that only happens in tests.
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    Ok(())
}

fn render(lines: &[Value]) -> String {
    lines.iter().map(|l| serde_json::to_string(l).expect("reports serialize") + "\n").collect()
}

fn execute(cli: &Cli) -> Result<u8, CliError> {
    configure_threads()?;
    let mut run = Run { cli, inputs: Inputs::default(), lines: Vec::new(), csv: Vec::new() };
    let outcome = dispatch(&mut run)?;
    let header = json!({
        "mmlimit": env!("CARGO_PKG_VERSION"),
        "command": to_value(&cli.cmd),
        "config": RunConfig {
            seed: cli.seed,
            fam_depth: cli.depth,
            eps_grid: EpsGrid { start: cli.eps_start, floor: cli.eps_floor, ratio: cli.eps_ratio },
            budget: cli.budget,
            tol: cli.tol,
        },
        "inputs": run.inputs.records,
        "exit": outcome.code(),
    });
    let mut lines = vec![header];
    lines.append(&mut run.lines);
    let text = render(&lines);
    let is_gen = matches!(cli.cmd, Cmd::Gen(_));
    match (&cli.out, is_gen) {
        (Some(p), false) => write_file(p, &text)?,
        // `gen` writes its document to --out and the report to stdout.
        (Some(_), true) | (None, false) => print!("{text}"),
        (None, true) => eprint!("{text}"),
    }
    if let Some(p) = &cli.csv {
        write_file(p, &(run.csv.join("\n") + "\n"))?;
    }
    Ok(outcome.code())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = std::panic::catch_unwind(|| execute(&cli));
    let code = match result {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            let _ = writeln!(std::io::stderr(), "{}", json!({ "error": e.to_string() }));
            EXIT_USAGE
        }
        Err(_) => EXIT_USAGE,
    };
    let _ = std::io::stdout().flush();
    ExitCode::from(code)
}
