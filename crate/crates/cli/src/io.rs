//! JSON encoding and decoding for every artifact the tool exchanges.
//!
//! All documents carry `"schema": "equideco/1"`. Rationals are strings,
//! `"p"` or `"p/q"`. Point sets are ascending flat index arrays next to
//! their ambient, and flows list only their nonzero oriented edges.

use std::fs;
use std::path::Path;

use anyhow::{anyhow, bail, Context, Result};
use equideco::{
    Ambient, CubeSpec, CubeTiling, FamilyMeta, FlowMap, GridKind, GroupElement, NestedFamily,
    NestedStage, Piece, PieceAssignment, PointSet, SiteFunction,
};
use num_rational::Ratio;
use serde_json::{json, Value};

pub const SCHEMA: &str = "equideco/1";

pub fn ratio_str(r: Ratio<i64>) -> String {
    if *r.denom() == 1 {
        r.numer().to_string()
    } else {
        format!("{}/{}", r.numer(), r.denom())
    }
}

pub fn parse_ratio(s: &str) -> Result<Ratio<i64>> {
    let mut parts = s.splitn(2, '/');
    let numer: i64 = parts
        .next()
        .unwrap_or_default()
        .trim()
        .parse()
        .with_context(|| format!("bad rational {s:?}"))?;
    let denom: i64 = match parts.next() {
        Some(d) => d.trim().parse().with_context(|| format!("bad rational {s:?}"))?,
        None => 1,
    };
    if denom == 0 {
        bail!("bad rational {s:?}: zero denominator");
    }
    Ok(Ratio::new(numer, denom))
}

pub fn write_json(path: &Path, value: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

pub fn read_json(path: &Path) -> Result<Value> {
    let text =
        fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn field<'v>(v: &'v Value, key: &str) -> Result<&'v Value> {
    v.get(key).ok_or_else(|| anyhow!("missing field {key:?}"))
}

fn int_array(v: &Value, key: &str) -> Result<Vec<i64>> {
    field(v, key)?
        .as_array()
        .ok_or_else(|| anyhow!("field {key:?} is not an array"))?
        .iter()
        .map(|x| x.as_i64().ok_or_else(|| anyhow!("field {key:?} holds a non-integer")))
        .collect()
}

pub fn encode_ambient(amb: &Ambient) -> Value {
    json!({
        "kind": match amb.kind {
            GridKind::Torus => "torus",
            GridKind::Window => "window",
        },
        "sides": amb.sides.clone(),
        "delta": amb.delta_orders.clone(),
    })
}

pub fn decode_ambient(v: &Value) -> Result<Ambient> {
    let kind = match field(v, "kind")?.as_str() {
        Some("torus") => GridKind::Torus,
        Some("window") => GridKind::Window,
        other => bail!("unknown ambient kind {other:?}"),
    };
    let sides = int_array(v, "sides")?;
    let delta = int_array(v, "delta")?;
    Ok(equideco::make_ambient(kind, sides, delta)?)
}

pub fn encode_set(a: &PointSet) -> Value {
    json!({
        "schema": SCHEMA,
        "ambient": encode_ambient(a.ambient()),
        "points": a.iter().collect::<Vec<usize>>(),
    })
}

pub fn decode_set(v: &Value) -> Result<PointSet> {
    let amb = decode_ambient(field(v, "ambient")?)?;
    let points = int_array(v, "points")?;
    let len = amb.len();
    let mut set = PointSet::empty(&amb);
    for p in points {
        if p < 0 || p as usize >= len {
            bail!("point index {p} outside the ambient of {len} sites");
        }
        set.insert(p as usize);
    }
    Ok(set)
}

pub fn encode_function(f: &SiteFunction) -> Value {
    json!({
        "schema": SCHEMA,
        "ambient": encode_ambient(f.ambient()),
        "values": f.values(),
    })
}

pub fn decode_function(v: &Value) -> Result<SiteFunction> {
    let amb = decode_ambient(field(v, "ambient")?)?;
    let values = int_array(v, "values")?;
    Ok(SiteFunction::new(amb, values)?)
}

pub fn encode_flow(phi: &FlowMap) -> Value {
    let entries: Vec<Value> = phi
        .support()
        .into_iter()
        .map(|(base, axis)| {
            json!({
                "base": base,
                "axis": axis,
                "value": ratio_str(phi.get(base, axis)),
            })
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "ambient": encode_ambient(phi.ambient()),
        "entries": entries,
        "sup": ratio_str(phi.sup_norm()),
    })
}

pub fn decode_flow(v: &Value) -> Result<FlowMap> {
    let amb = decode_ambient(field(v, "ambient")?)?;
    let mut phi = FlowMap::zero(&amb);
    let entries = field(v, "entries")?
        .as_array()
        .ok_or_else(|| anyhow!("field \"entries\" is not an array"))?;
    for e in entries {
        let base = field(e, "base")?
            .as_u64()
            .ok_or_else(|| anyhow!("edge base is not an index"))? as usize;
        let axis = field(e, "axis")?
            .as_u64()
            .ok_or_else(|| anyhow!("edge axis is not an index"))? as usize;
        let value = parse_ratio(
            field(e, "value")?
                .as_str()
                .ok_or_else(|| anyhow!("edge value is not a rational string"))?,
        )?;
        if base >= amb.len() || axis >= amb.axes() {
            bail!("edge ({base}, {axis}) outside the ambient");
        }
        phi.set(base, axis, value);
    }
    Ok(phi)
}

fn encode_cube(cube: &CubeSpec) -> Value {
    json!({ "corner": cube.corner.clone(), "extents": cube.extents.clone() })
}

fn decode_cube(v: &Value) -> Result<CubeSpec> {
    Ok(CubeSpec {
        corner: int_array(v, "corner")?,
        extents: int_array(v, "extents")?,
    })
}

pub fn encode_tiling(tiling: &CubeTiling) -> Value {
    let segments: Vec<Vec<Value>> = tiling
        .axis_segments
        .iter()
        .map(|axis| axis.iter().map(|&(start, len)| json!([start, len])).collect())
        .collect();
    json!({
        "schema": SCHEMA,
        "ambient": encode_ambient(&tiling.ambient),
        "n": tiling.n,
        "offsets": tiling.offsets.clone(),
        "axis_segments": segments,
        "cubes": tiling.cubes.iter().map(encode_cube).collect::<Vec<Value>>(),
    })
}

pub fn decode_tiling(v: &Value) -> Result<CubeTiling> {
    let ambient = decode_ambient(field(v, "ambient")?)?;
    let n = field(v, "n")?
        .as_i64()
        .ok_or_else(|| anyhow!("tiling side n is not an integer"))?;
    let offsets = int_array(v, "offsets")?;
    let mut axis_segments = Vec::new();
    for axis in field(v, "axis_segments")?
        .as_array()
        .ok_or_else(|| anyhow!("field \"axis_segments\" is not an array"))?
    {
        let mut segs = Vec::new();
        for pair in axis
            .as_array()
            .ok_or_else(|| anyhow!("axis segment list is not an array"))?
        {
            let pair = pair
                .as_array()
                .filter(|p| p.len() == 2)
                .ok_or_else(|| anyhow!("axis segment is not a [start, len] pair"))?;
            let start = pair[0]
                .as_i64()
                .ok_or_else(|| anyhow!("segment start is not an integer"))?;
            let len = pair[1]
                .as_i64()
                .ok_or_else(|| anyhow!("segment length is not an integer"))?;
            segs.push((start, len));
        }
        axis_segments.push(segs);
    }
    let cubes = field(v, "cubes")?
        .as_array()
        .ok_or_else(|| anyhow!("field \"cubes\" is not an array"))?
        .iter()
        .map(decode_cube)
        .collect::<Result<Vec<CubeSpec>>>()?;
    if axis_segments.len() != ambient.d() || offsets.len() != ambient.d() {
        bail!("tiling axis data does not match the ambient dimension");
    }
    Ok(CubeTiling {
        ambient,
        n,
        cubes,
        axis_segments,
        offsets,
    })
}

pub fn encode_family(amb: &Ambient, family: &NestedFamily) -> Value {
    let stages: Vec<Value> = family
        .stages
        .iter()
        .map(|s| {
            json!({
                "n": s.n,
                "cubes": s.cubes.iter().map(encode_cube).collect::<Vec<Value>>(),
                "chains": s
                    .chains
                    .iter()
                    .map(|chain| chain.iter().map(encode_cube).collect::<Vec<Value>>())
                    .collect::<Vec<Vec<Value>>>(),
                "coverage": ratio_str(s.coverage),
                "coverage_bound": ratio_str(s.coverage_bound),
            })
        })
        .collect();
    let families: Vec<Value> = family
        .families
        .iter()
        .map(|f| json!({ "m": f.m, "side": f.side, "offsets": f.offsets.clone() }))
        .collect();
    json!({
        "schema": SCHEMA,
        "ambient": encode_ambient(amb),
        "stages": stages,
        "families": families,
        "union_coverage": ratio_str(family.union_coverage),
        "series_bound": family.series_bound,
    })
}

/// Returns the family together with the ambient it was built over.
pub fn decode_family(v: &Value) -> Result<(Ambient, NestedFamily)> {
    let amb = decode_ambient(field(v, "ambient")?)?;
    let cubes_of = |owner: &Value, key: &str| -> Result<Vec<CubeSpec>> {
        field(owner, key)?
            .as_array()
            .ok_or_else(|| anyhow!("field {key:?} is not an array"))?
            .iter()
            .map(decode_cube)
            .collect()
    };
    let mut stages = Vec::new();
    for s in field(v, "stages")?
        .as_array()
        .ok_or_else(|| anyhow!("field \"stages\" is not an array"))?
    {
        let mut chains = Vec::new();
        for chain in field(s, "chains")?
            .as_array()
            .ok_or_else(|| anyhow!("field \"chains\" is not an array"))?
        {
            chains.push(
                chain
                    .as_array()
                    .ok_or_else(|| anyhow!("chain is not an array"))?
                    .iter()
                    .map(decode_cube)
                    .collect::<Result<Vec<CubeSpec>>>()?,
            );
        }
        stages.push(NestedStage {
            n: field(s, "n")?
                .as_i64()
                .ok_or_else(|| anyhow!("stage index is not an integer"))?,
            cubes: cubes_of(s, "cubes")?,
            chains,
            coverage: parse_ratio(
                field(s, "coverage")?
                    .as_str()
                    .ok_or_else(|| anyhow!("coverage is not a rational string"))?,
            )?,
            coverage_bound: parse_ratio(
                field(s, "coverage_bound")?
                    .as_str()
                    .ok_or_else(|| anyhow!("coverage_bound is not a rational string"))?,
            )?,
        });
    }
    let mut families = Vec::new();
    for f in field(v, "families")?
        .as_array()
        .ok_or_else(|| anyhow!("field \"families\" is not an array"))?
    {
        families.push(FamilyMeta {
            m: field(f, "m")?
                .as_i64()
                .ok_or_else(|| anyhow!("family index is not an integer"))?,
            side: field(f, "side")?
                .as_i64()
                .ok_or_else(|| anyhow!("family side is not an integer"))?,
            offsets: int_array(f, "offsets")?,
        });
    }
    let family = NestedFamily {
        stages,
        families,
        union_coverage: parse_ratio(
            field(v, "union_coverage")?
                .as_str()
                .ok_or_else(|| anyhow!("union_coverage is not a rational string"))?,
        )?,
        series_bound: field(v, "series_bound")?
            .as_f64()
            .ok_or_else(|| anyhow!("series_bound is not a number"))?,
    };
    Ok((amb, family))
}

pub fn encode_pieces(assignment: &PieceAssignment) -> Value {
    let amb = assignment.source.ambient();
    let pieces: Vec<Value> = assignment
        .pieces
        .iter()
        .map(|p| {
            json!({
                "gamma": {
                    "t": p.gamma.translation.clone(),
                    "delta": p.gamma.delta.clone(),
                },
                "points": p.points.iter().collect::<Vec<usize>>(),
            })
        })
        .collect();
    json!({
        "schema": SCHEMA,
        "ambient": encode_ambient(amb),
        "source": assignment.source.iter().collect::<Vec<usize>>(),
        "target": assignment.target.iter().collect::<Vec<usize>>(),
        "movement_bound": assignment.movement_bound,
        "pieces": pieces,
    })
}

pub fn decode_pieces(v: &Value) -> Result<PieceAssignment> {
    let amb = decode_ambient(field(v, "ambient")?)?;
    let from_list = |key: &str, owner: &Value| -> Result<PointSet> {
        let points = int_array(owner, key)?;
        let mut set = PointSet::empty(&amb);
        for p in points {
            if p < 0 || p as usize >= amb.len() {
                bail!("point index {p} outside the ambient");
            }
            set.insert(p as usize);
        }
        Ok(set)
    };
    let source = from_list("source", v)?;
    let target = from_list("target", v)?;
    let movement_bound = field(v, "movement_bound")?
        .as_i64()
        .ok_or_else(|| anyhow!("movement_bound is not an integer"))?;
    let mut pieces = Vec::new();
    for p in field(v, "pieces")?
        .as_array()
        .ok_or_else(|| anyhow!("field \"pieces\" is not an array"))?
    {
        let g = field(p, "gamma")?;
        let gamma = GroupElement::new(&amb, int_array(g, "t")?, int_array(g, "delta")?)?;
        pieces.push(Piece {
            gamma,
            points: from_list("points", p)?,
        });
    }
    Ok(PieceAssignment {
        source,
        target,
        pieces,
        movement_bound,
    })
}
