//! Command-line front end: condition checks, flow construction and
//! rounding, decomposition, verification, reference oracles, rendering,
//! and the disk-to-square demo.
//!
//! Primary output is one JSON document on stdout; `--out DIR` additionally
//! writes artifact files. Exit codes: 0 success or positive verdict, 1
//! negative verdict, 2 input error, 3 broken internal invariant.

use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use equideco::{
    build_exact_flow, build_real_flow, check_k_hall, decompose, equidistribution_report,
    make_integer_flow, nested_family, nestedness_violations, oracle, tile_cubes,
    verify_decomposition, DecomposeReport, DiscrepancyReport, HallVerdict, NestedFamily,
    RealFlowReport, RoundingReport, SiteFunction,
};
use equideco_cli::{demo, io, render};
use num_rational::Ratio;
use serde_json::{json, Value};

#[derive(Parser)]
#[command(name = "equideco", version, about = "Equidecompositions on finite grid ambients")]
struct Cli {
    /// Seed for every randomized choice.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    /// Output format; only "json" is implemented.
    #[arg(long, global = true, default_value = "json")]
    format: String,
    /// Directory for artifact files, created if missing.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Decide the distance-k mass transport condition.
    CheckHall {
        /// Site-function file; alternative to --input/--input2.
        #[arg(long, conflicts_with_all = ["input", "input2"])]
        function: Option<PathBuf>,
        /// Source set A (used as the indicator difference A - B).
        #[arg(long, requires = "input2")]
        input: Option<PathBuf>,
        /// Target set B.
        #[arg(long, requires = "input")]
        input2: Option<PathBuf>,
        #[arg(long)]
        k: usize,
    },
    /// Windowed equidistribution report for a point set.
    Discrepancy {
        #[arg(long)]
        input: PathBuf,
        /// Largest window extent tested.
        #[arg(long, default_value_t = 16)]
        n_max: i64,
    },
    /// Cube tilings and nested cube families over an ambient.
    Tilings {
        /// Ambient file ({kind, sides, delta}).
        #[arg(long)]
        ambient: PathBuf,
        /// Tile side for a single tiling.
        #[arg(long, conflicts_with = "nested")]
        n: Option<i64>,
        /// Build a nested family instead of a single tiling.
        #[arg(long)]
        nested: bool,
        /// First stage index of the nested family.
        #[arg(long, default_value_t = 2)]
        n0: i64,
        /// Number of stages.
        #[arg(long, default_value_t = 3)]
        stages: usize,
        /// Stage side growth: cubic, square, or linear in the stage index.
        #[arg(long, default_value = "cubic")]
        schedule: String,
    },
    /// Build a bounded fractional flow whose divergence tracks f.
    RealFlow {
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        k: usize,
        /// Per-tile defect fraction (rational); omit for the exact variant.
        #[arg(long)]
        delta: Option<String>,
    },
    /// Round a fractional flow to integers along a nested family.
    RoundFlow {
        #[arg(long)]
        flow: PathBuf,
        /// Divergence target the rounded flow must keep.
        #[arg(long)]
        function: PathBuf,
        /// Nested-family file; omit to round without a cube cascade.
        #[arg(long)]
        family: Option<PathBuf>,
    },
    /// Extract equidecomposition pieces moving A onto B.
    Decompose {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        k: usize,
        /// Discrepancy constant for the tile-size estimate (rational).
        #[arg(long)]
        c: Option<String>,
    },
    /// Re-check a pieces file against its source and target sets.
    Verify {
        #[arg(long)]
        pieces: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
    },
    /// Reference deciders over materialized flow networks.
    Oracle {
        #[command(subcommand)]
        which: OracleCmd,
    },
    /// End-to-end demonstrations.
    Demo {
        #[command(subcommand)]
        which: DemoCmd,
    },
    /// Draw sets, tilings, flows, and pieces as SVG (two grid axes only).
    Render {
        /// Ambient file; inferred from the first layer when omitted.
        #[arg(long)]
        ambient: Option<PathBuf>,
        /// Point-set file drawn as filled cells.
        #[arg(long)]
        set: Option<PathBuf>,
        /// Tiling file drawn as cube outlines.
        #[arg(long)]
        tiling: Option<PathBuf>,
        /// Flow file drawn as arrows scaled by magnitude.
        #[arg(long)]
        flow: Option<PathBuf>,
        /// Pieces file drawn with one fill color per piece.
        #[arg(long)]
        pieces: Option<PathBuf>,
        /// Output SVG path.
        #[arg(long)]
        output: PathBuf,
    },
}

#[derive(Subcommand)]
enum OracleCmd {
    /// Both directions of the distance-k condition by max-flow.
    Hall {
        #[arg(long, conflicts_with_all = ["input", "input2"])]
        function: Option<PathBuf>,
        #[arg(long, requires = "input2")]
        input: Option<PathBuf>,
        #[arg(long, requires = "input")]
        input2: Option<PathBuf>,
        #[arg(long)]
        k: usize,
    },
    /// Perfect matching between two sets within a movement budget.
    Equidecomposable {
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long)]
        budget: i64,
    },
    /// Existence of a capacity-bounded flow with divergence f.
    FlowFeasible {
        #[arg(long)]
        function: PathBuf,
        #[arg(long)]
        cap: i64,
    },
}

#[derive(Subcommand)]
enum DemoCmd {
    /// Equal-area disk and square on a window, decomposed end to end.
    CircleSquare {
        #[arg(long, default_value_t = 64)]
        side: i64,
        /// Transport distance; the measured c/n discrepancy of the sampled
        /// vectors needs k around 16 before the condition holds at side 64.
        #[arg(long, default_value_t = 16)]
        k: usize,
        /// Largest window extent in the discrepancy reports.
        #[arg(long, default_value_t = 16)]
        n_max: i64,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            let code = match e.downcast_ref::<equideco::Error>() {
                Some(equideco::Error::Internal(_)) => 3,
                _ => 2,
            };
            ExitCode::from(code)
        }
    }
}

fn emit(doc: &Value) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(doc)?);
    Ok(())
}

fn save(out: &Option<PathBuf>, name: &str, doc: &Value) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        io::write_json(&dir.join(name), doc)?;
    }
    Ok(())
}

fn save_text(out: &Option<PathBuf>, name: &str, text: &str) -> Result<()> {
    if let Some(dir) = out {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

fn load_set(path: &PathBuf) -> Result<equideco::PointSet> {
    io::decode_set(&io::read_json(path)?)
}

/// A site function, either direct or as the indicator difference of two
/// sets.
fn load_function(
    function: Option<PathBuf>,
    input: Option<PathBuf>,
    input2: Option<PathBuf>,
) -> Result<SiteFunction> {
    match (function, input, input2) {
        (Some(f), None, None) => io::decode_function(&io::read_json(&f)?),
        (None, Some(a), Some(b)) => {
            let a = load_set(&a)?;
            let b = load_set(&b)?;
            Ok(SiteFunction::indicator_difference(&a, &b)?)
        }
        _ => bail!("pass either --function, or both --input and --input2"),
    }
}

fn verdict_value(verdict: &HallVerdict) -> Value {
    json!({
        "schema": io::SCHEMA,
        "k": verdict.k,
        "satisfied": verdict.satisfied,
        "witness": verdict.witness.as_ref().map(|w| json!({
            "side": w.side,
            "deficit": w.deficit,
            "points": w.points.iter().collect::<Vec<usize>>(),
        })),
    })
}

fn discrepancy_value(r: &DiscrepancyReport) -> Value {
    json!({
        "mu": io::ratio_str(r.mu),
        "fitted_c": io::ratio_str(r.fitted_c),
        "rows": r.rows.iter().map(|row| json!({
            "n": row.n,
            "worst": io::ratio_str(row.worst),
            "witness_corner": row.witness_corner.clone(),
            "skipped": row.skipped,
        })).collect::<Vec<Value>>(),
    })
}

fn real_flow_value(r: &RealFlowReport) -> Value {
    json!({
        "k": r.k,
        "delta": io::ratio_str(r.delta),
        "levels": r.levels,
        "tile_side": r.tile_side,
        "tile_count": r.tile_count,
        "ball_size": r.ball_size,
        "worst_tile_defect": io::ratio_str(r.worst_tile_defect),
        "matched_pairs": r.matched_pairs,
        "exact_sites": r.exact_sites.len(),
        "residual_fraction": io::ratio_str(r.residual_fraction),
        "residual_bound": io::ratio_str(r.residual_bound),
        "sup_norm": io::ratio_str(r.sup_norm),
        "sup_bound": r.sup_bound,
    })
}

fn rounding_value(r: &RoundingReport) -> Value {
    json!({
        "floor_only": r.floor_only,
        "stages": r.stages,
        "cubes_rounded": r.cubes_rounded,
        "corrected_components": r.corrected_components,
        "uncorrected_sites": r.uncorrected_sites.len(),
        "max_cascade_touches": r.max_cascade_touches,
        "max_change": io::ratio_str(r.max_change),
        "sup_in": io::ratio_str(r.sup_in),
        "sup_out": io::ratio_str(r.sup_out),
        "change_bound": r.change_bound,
        "integral": r.integral,
    })
}

fn decompose_value(r: &DecomposeReport) -> Value {
    json!({
        "k": r.k,
        "alpha": io::ratio_str(r.alpha),
        "c_used": io::ratio_str(r.c_used),
        "flow_bound": r.flow_bound,
        "tile_side": r.n,
        "single_tile": r.single_tile,
        "tile_count": r.tile_count,
        "max_degree": r.max_degree,
        "reservoir_size": r.reservoir_size,
        "sup_tile_flow": r.sup_tile_flow,
        "step1_pairs": r.step1_pairs,
        "movement_bound": r.movement_bound,
        "max_distance": r.max_distance,
        "piece_count": r.piece_count,
        "rounding": rounding_value(&r.rounding),
    })
}

fn schedule_fn(name: &str) -> Result<Box<dyn Fn(i64) -> i64>> {
    Ok(match name {
        "cubic" => Box::new(|m| m * m * m),
        "square" => Box::new(|m| m * m),
        "linear" => Box::new(|m| m),
        other => bail!("unknown schedule {other:?}; use cubic, square, or linear"),
    })
}

fn empty_family() -> NestedFamily {
    NestedFamily {
        stages: vec![],
        families: vec![],
        union_coverage: Ratio::from_integer(0),
        series_bound: 0.0,
    }
}

fn run(cli: Cli) -> Result<u8> {
    if cli.format != "json" {
        bail!("unsupported format {:?}; only \"json\" is implemented", cli.format);
    }
    let out = cli.out;
    let seed = cli.seed;
    match cli.cmd {
        Cmd::CheckHall {
            function,
            input,
            input2,
            k,
        } => {
            let f = load_function(function, input, input2)?;
            let verdict = check_k_hall(&f, k)?;
            let doc = verdict_value(&verdict);
            save(&out, "verdict.json", &doc)?;
            save(&out, "function.json", &io::encode_function(&f))?;
            emit(&doc)?;
            Ok(if verdict.satisfied { 0 } else { 1 })
        }
        Cmd::Discrepancy { input, n_max } => {
            let a = load_set(&input)?;
            let report = equidistribution_report(&a, n_max)?;
            let doc = json!({
                "schema": io::SCHEMA,
                "set_size": a.len(),
                "report": discrepancy_value(&report),
            });
            save(&out, "discrepancy.json", &doc)?;
            emit(&doc)?;
            Ok(0)
        }
        Cmd::Tilings {
            ambient,
            n,
            nested,
            n0,
            stages,
            schedule,
        } => {
            let amb = io::decode_ambient(&io::read_json(&ambient)?)?;
            if nested {
                let family = nested_family(&amb, n0, stages, schedule_fn(&schedule)?, seed)?;
                let violations = nestedness_violations(&amb, &family);
                let family_doc = io::encode_family(&amb, &family);
                let doc = json!({
                    "schema": io::SCHEMA,
                    "kind": "nested-family",
                    "stage_sides": family.families.iter().map(|f| f.side).collect::<Vec<i64>>(),
                    "stage_coverage": family
                        .stages
                        .iter()
                        .map(|s| io::ratio_str(s.coverage))
                        .collect::<Vec<String>>(),
                    "union_coverage": io::ratio_str(family.union_coverage),
                    "series_bound": family.series_bound,
                    "nestedness_violations": violations.len(),
                    "family": family_doc,
                });
                save(&out, "family.json", &doc["family"])?;
                emit(&doc)?;
                Ok(if violations.is_empty() { 0 } else { 1 })
            } else {
                let n = match n {
                    Some(n) => n,
                    None => bail!("pass --n for a single tiling or --nested for a family"),
                };
                let tiling = tile_cubes(&amb, n)?;
                let doc = io::encode_tiling(&tiling);
                save(&out, "tiling.json", &doc)?;
                if amb.d() == 2 && amb.delta_rank() == 0 {
                    let svg = render::svg_document(&amb, &[render::Layer::Tiling(&tiling)])?;
                    save_text(&out, "tiling.svg", &svg)?;
                }
                emit(&doc)?;
                Ok(0)
            }
        }
        Cmd::RealFlow { function, k, delta } => {
            let f = io::decode_function(&io::read_json(&function)?)?;
            let result = match &delta {
                Some(d) => build_real_flow(&f, k, io::parse_ratio(d)?),
                None => build_exact_flow(&f, k),
            };
            match result {
                Ok((phi, report)) => {
                    let flow_doc = io::encode_flow(&phi);
                    let doc = json!({
                        "schema": io::SCHEMA,
                        "feasible": true,
                        "report": real_flow_value(&report),
                        "flow": flow_doc,
                    });
                    save(&out, "flow.json", &doc["flow"])?;
                    emit(&doc)?;
                    Ok(0)
                }
                Err(equideco::Error::HallViolation { .. }) => {
                    let verdict = check_k_hall(&f, k)?;
                    let doc = json!({
                        "schema": io::SCHEMA,
                        "feasible": false,
                        "hall": verdict_value(&verdict),
                    });
                    save(&out, "witness.json", &doc)?;
                    emit(&doc)?;
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::RoundFlow {
            flow,
            function,
            family,
        } => {
            let phi = io::decode_flow(&io::read_json(&flow)?)?;
            let f = io::decode_function(&io::read_json(&function)?)?;
            let fam = match family {
                Some(path) => {
                    let (fam_amb, fam) = io::decode_family(&io::read_json(&path)?)?;
                    if &fam_amb != phi.ambient() {
                        bail!("family and flow live on different ambients");
                    }
                    fam
                }
                None => empty_family(),
            };
            let (psi, report) = make_integer_flow(&phi, &f, &fam)?;
            let doc = json!({
                "schema": io::SCHEMA,
                "report": rounding_value(&report),
                "flow": io::encode_flow(&psi),
            });
            save(&out, "rounded.json", &doc["flow"])?;
            emit(&doc)?;
            Ok(0)
        }
        Cmd::Decompose { a, b, k, c } => {
            let a = load_set(&a)?;
            let b = load_set(&b)?;
            let c = c.as_deref().map(io::parse_ratio).transpose()?;
            match decompose(&a, &b, k, c) {
                Ok((assignment, report)) => {
                    let pieces_doc = io::encode_pieces(&assignment);
                    save(&out, "pieces.json", &pieces_doc)?;
                    let mut doc = pieces_doc;
                    doc["decomposed"] = json!(true);
                    doc["report"] = decompose_value(&report);
                    save(&out, "report.json", &doc)?;
                    emit(&doc)?;
                    Ok(0)
                }
                Err(equideco::Error::SizeMismatch { a: na, b: nb }) => {
                    let doc = json!({
                        "schema": io::SCHEMA,
                        "decomposed": false,
                        "reason": format!("point sets have different sizes: {na} vs {nb}"),
                    });
                    emit(&doc)?;
                    Ok(1)
                }
                Err(equideco::Error::HallViolation { k: vk, .. }) => {
                    let f = SiteFunction::indicator_difference(&a, &b)?;
                    let verdict = check_k_hall(&f, vk)?;
                    let doc = json!({
                        "schema": io::SCHEMA,
                        "decomposed": false,
                        "hall": verdict_value(&verdict),
                    });
                    save(&out, "witness.json", &doc)?;
                    emit(&doc)?;
                    Ok(1)
                }
                Err(e) => Err(e.into()),
            }
        }
        Cmd::Verify { pieces, a, b } => {
            let assignment = io::decode_pieces(&io::read_json(&pieces)?)?;
            let a = load_set(&a)?;
            let b = load_set(&b)?;
            let report = verify_decomposition(&assignment, &a, &b)?;
            let doc = json!({
                "schema": io::SCHEMA,
                "valid": report.valid,
                "violation": report.violation,
            });
            emit(&doc)?;
            Ok(if report.valid { 0 } else { 1 })
        }
        Cmd::Oracle { which } => match which {
            OracleCmd::Hall {
                function,
                input,
                input2,
                k,
            } => {
                let f = load_function(function, input, input2)?;
                let verdict = oracle::hall_feasible_oracle(f.ambient(), f.values(), k)?;
                let doc = json!({
                    "schema": io::SCHEMA,
                    "k": k,
                    "positive": verdict.positive,
                    "negative": verdict.negative,
                    "satisfied": verdict.satisfied(),
                });
                emit(&doc)?;
                Ok(if verdict.satisfied() { 0 } else { 1 })
            }
            OracleCmd::Equidecomposable { a, b, budget } => {
                let a = load_set(&a)?;
                let b = load_set(&b)?;
                let ok = oracle::equidecomposable_oracle(&a, &b, budget)?;
                let doc = json!({
                    "schema": io::SCHEMA,
                    "budget": budget,
                    "equidecomposable": ok,
                });
                emit(&doc)?;
                Ok(if ok { 0 } else { 1 })
            }
            OracleCmd::FlowFeasible { function, cap } => {
                let f = io::decode_function(&io::read_json(&function)?)?;
                let ok = oracle::flow_feasibility_oracle(f.ambient(), f.values(), cap)?;
                let doc = json!({
                    "schema": io::SCHEMA,
                    "cap": cap,
                    "feasible": ok,
                });
                emit(&doc)?;
                Ok(if ok { 0 } else { 1 })
            }
        },
        Cmd::Demo { which } => match which {
            DemoCmd::CircleSquare { side, k, n_max } => {
                let result = demo::circle_square_demo(&demo::DemoConfig {
                    side,
                    k,
                    n_max,
                    seed,
                })?;
                save(&out, "a.json", &io::encode_set(&result.disk))?;
                save(&out, "b.json", &io::encode_set(&result.square))?;
                let disk_layer = render::Layer::Set {
                    points: &result.disk,
                    fill: "#4e79a7",
                };
                let square_layer = render::Layer::Set {
                    points: &result.square,
                    fill: "#f28e2b",
                };
                save_text(
                    &out,
                    "a.svg",
                    &render::svg_document(&result.ambient, &[disk_layer])?,
                )?;
                save_text(
                    &out,
                    "b.svg",
                    &render::svg_document(&result.ambient, &[square_layer])?,
                )?;
                let mut doc = json!({
                    "schema": io::SCHEMA,
                    "window": side,
                    "k": k,
                    "seed": seed,
                    "base": result.base,
                    "vectors": result.vectors,
                    "warnings": result.warnings,
                    "counts": {
                        "disk_raw": result.raw_counts.0,
                        "square_raw": result.raw_counts.1,
                        "dropped": [result.dropped.0, result.dropped.1],
                        "final": result.disk.len(),
                    },
                    "disk_discrepancy": discrepancy_value(&result.disk_discrepancy),
                    "square_discrepancy": discrepancy_value(&result.square_discrepancy),
                });
                match &result.outcome {
                    demo::DemoOutcome::Decomposed { assignment, report } => {
                        doc["decomposed"] = json!(true);
                        doc["report"] = decompose_value(report);
                        save(&out, "pieces.json", &io::encode_pieces(assignment))?;
                        let pieces_layer = render::Layer::Pieces(assignment);
                        save_text(
                            &out,
                            "pieces.svg",
                            &render::svg_document(&result.ambient, &[pieces_layer])?,
                        )?;
                        save(&out, "report.json", &doc)?;
                        emit(&doc)?;
                        Ok(0)
                    }
                    demo::DemoOutcome::Obstructed { error } => {
                        doc["decomposed"] = json!(false);
                        doc["obstruction"] = json!(error.to_string());
                        let f =
                            SiteFunction::indicator_difference(&result.disk, &result.square)?;
                        let verdict = check_k_hall(&f, k)?;
                        doc["hall"] = verdict_value(&verdict);
                        save(&out, "witness.json", &doc["hall"])?;
                        save(&out, "report.json", &doc)?;
                        emit(&doc)?;
                        Ok(1)
                    }
                }
            }
        },
        Cmd::Render {
            ambient,
            set,
            tiling,
            flow,
            pieces,
            output,
        } => {
            let set = match set {
                Some(p) => Some(load_set(&p)?),
                None => None,
            };
            let tiling = match tiling {
                Some(p) => Some(io::decode_tiling(&io::read_json(&p)?)?),
                None => None,
            };
            let flow = match flow {
                Some(p) => Some(io::decode_flow(&io::read_json(&p)?)?),
                None => None,
            };
            let pieces = match pieces {
                Some(p) => Some(io::decode_pieces(&io::read_json(&p)?)?),
                None => None,
            };
            let amb = if let Some(p) = ambient {
                io::decode_ambient(&io::read_json(&p)?)?
            } else if let Some(s) = &set {
                s.ambient().clone()
            } else if let Some(t) = &tiling {
                t.ambient.clone()
            } else if let Some(f) = &flow {
                f.ambient().clone()
            } else if let Some(p) = &pieces {
                p.source.ambient().clone()
            } else {
                bail!("nothing to draw: pass --ambient or at least one layer");
            };
            let mut layers = Vec::new();
            if let Some(s) = &set {
                layers.push(render::Layer::Set {
                    points: s,
                    fill: "#4e79a7",
                });
            }
            if let Some(t) = &tiling {
                layers.push(render::Layer::Tiling(t));
            }
            if let Some(f) = &flow {
                layers.push(render::Layer::Flow(f));
            }
            if let Some(p) = &pieces {
                layers.push(render::Layer::Pieces(p));
            }
            let svg = render::svg_document(&amb, &layers)?;
            fs::write(&output, &svg)
                .with_context(|| format!("writing {}", output.display()))?;
            let doc = json!({
                "schema": io::SCHEMA,
                "output": output.display().to_string(),
                "layers": layers.len(),
            });
            emit(&doc)?;
            Ok(0)
        }
    }
}
