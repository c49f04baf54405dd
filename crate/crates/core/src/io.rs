//! JSON model files and CSV trajectory export.
//!
//! Matrices are arrays of row arrays. An empty array is a matrix with no rows;
//! its column count is inferred from the other fields. Numbers are written
//! with the shortest representation that parses back to the same `f64`.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde_json::{json, Map, Value};

use crate::dvtransform::DrivingVariableSystem;
use crate::error::{Error, Result};
use crate::numkit::{Matrix, Vector};
use crate::refinement::RefinedController;
use crate::relations::{InterfaceMap, LinearStateMap};
use crate::systems::{Controller, DescriptorSystem, InitialSet, Trajectory};

fn parse_err(location: impl Into<String>, message: impl Into<String>) -> Error {
    Error::Parse {
        location: location.into(),
        message: message.into(),
    }
}

/// Parses a JSON document, reporting syntax errors by line and column.
pub fn parse_document(text: &str) -> Result<Value> {
    serde_json::from_str(text).map_err(|e| {
        parse_err(
            format!("line {}, column {}", e.line(), e.column()),
            e.to_string(),
        )
    })
}

fn read_document(path: &Path) -> Result<Value> {
    let text = fs::read_to_string(path)?;
    parse_document(&text).map_err(|e| match e {
        Error::Parse { location, message } => {
            parse_err(format!("{}: {location}", path.display()), message)
        }
        other => other,
    })
}

fn write_document(path: &Path, doc: &Value) -> Result<()> {
    let mut text = serde_json::to_string_pretty(doc).expect("finite values serialize");
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn object<'a>(doc: &'a Value, what: &str) -> Result<&'a Map<String, Value>> {
    doc.as_object()
        .ok_or_else(|| parse_err("<root>", format!("{what} file must be a JSON object")))
}

fn field<'a>(obj: &'a Map<String, Value>, name: &str) -> Result<&'a Value> {
    obj.get(name)
        .ok_or_else(|| parse_err(name, "missing field"))
}

fn number(v: &Value, loc: &str) -> Result<f64> {
    let x = v
        .as_f64()
        .ok_or_else(|| parse_err(loc, format!("expected a number, found {v}")))?;
    if !x.is_finite() {
        return Err(parse_err(loc, "number is not finite"));
    }
    Ok(x)
}

/// Reads a vector from a JSON array of numbers.
pub fn vector_from_json(v: &Value, loc: &str) -> Result<Vector> {
    let items = v
        .as_array()
        .ok_or_else(|| parse_err(loc, "expected an array of numbers"))?;
    let data = items
        .iter()
        .enumerate()
        .map(|(i, x)| number(x, &format!("{loc}[{i}]")))
        .collect::<Result<Vec<_>>>()?;
    Ok(Vector::from_vec(data))
}

/// Reads a matrix from an array of row arrays. `cols_if_empty` fixes the
/// column count of a matrix with no rows.
pub fn matrix_from_json(v: &Value, loc: &str, cols_if_empty: usize) -> Result<Matrix> {
    let rows = v
        .as_array()
        .ok_or_else(|| parse_err(loc, "expected an array of rows"))?;
    if rows.is_empty() {
        return Ok(Matrix::zeros(0, cols_if_empty));
    }
    let mut data = Vec::new();
    let mut cols = None;
    for (i, row) in rows.iter().enumerate() {
        let r = vector_from_json(row, &format!("{loc}[{i}]"))?;
        match cols {
            None => cols = Some(r.len()),
            Some(c) if c != r.len() => {
                return Err(parse_err(
                    format!("{loc}[{i}]"),
                    format!("row has {} entries, expected {c}", r.len()),
                ))
            }
            _ => {}
        }
        data.extend(r.iter().copied());
    }
    Ok(Matrix::from_row_slice(rows.len(), cols.unwrap_or(0), &data))
}

pub fn matrix_to_json(m: &Matrix) -> Value {
    Value::Array(
        m.row_iter()
            .map(|r| Value::Array(r.iter().map(|&x| json!(x)).collect()))
            .collect(),
    )
}

pub fn vector_to_json(v: &Vector) -> Value {
    Value::Array(v.iter().map(|&x| json!(x)).collect())
}

fn matrix_field(obj: &Map<String, Value>, name: &str, cols_if_empty: usize) -> Result<Matrix> {
    matrix_from_json(field(obj, name)?, name, cols_if_empty)
}

fn rows_of(obj: &Map<String, Value>, name: &str) -> usize {
    obj.get(name).and_then(Value::as_array).map_or(0, Vec::len)
}

fn cols_of(obj: &Map<String, Value>, name: &str) -> usize {
    obj.get(name)
        .and_then(Value::as_array)
        .and_then(|rows| rows.first())
        .and_then(Value::as_array)
        .map_or(0, Vec::len)
}

pub fn init_from_json(v: &Value, dim: usize) -> Result<InitialSet> {
    let obj = v
        .as_object()
        .ok_or_else(|| parse_err("init", "expected an object with a \"kind\" field"))?;
    let kind = obj
        .get("kind")
        .and_then(Value::as_str)
        .ok_or_else(|| parse_err("init.kind", "expected a string"))?;
    let get = |name: &str| {
        obj.get(name)
            .ok_or_else(|| parse_err(format!("init.{name}"), "missing field"))
    };
    let set = match kind {
        "full" => InitialSet::full(dim),
        "subspace" => InitialSet::subspace(matrix_from_json(get("basis")?, "init.basis", 0)?)?,
        "box" => InitialSet::boxed(
            vector_from_json(get("lower")?, "init.lower")?,
            vector_from_json(get("upper")?, "init.upper")?,
        )?,
        "points" => {
            let pts = get("points")?
                .as_array()
                .ok_or_else(|| parse_err("init.points", "expected an array of points"))?
                .iter()
                .enumerate()
                .map(|(i, p)| vector_from_json(p, &format!("init.points[{i}]")))
                .collect::<Result<Vec<_>>>()?;
            InitialSet::points(dim, pts)?
        }
        other => {
            return Err(parse_err(
                "init.kind",
                format!("unknown kind {other:?} (expected full, subspace, box or points)"),
            ))
        }
    };
    if set.dim() != dim {
        return Err(Error::DimensionMismatch(format!(
            "initial set has dimension {}, state dimension is {dim}",
            set.dim()
        )));
    }
    Ok(set)
}

pub fn init_to_json(init: &InitialSet) -> Value {
    match init {
        InitialSet::FullSpace { .. } => json!({ "kind": "full" }),
        InitialSet::SubspaceSpan { basis } => {
            json!({ "kind": "subspace", "basis": matrix_to_json(basis) })
        }
        InitialSet::Box { lower, upper } => json!({
            "kind": "box",
            "lower": vector_to_json(lower),
            "upper": vector_to_json(upper),
        }),
        InitialSet::Points { points, .. } => json!({
            "kind": "points",
            "points": points.iter().map(vector_to_json).collect::<Vec<_>>(),
        }),
    }
}

fn init_field(obj: &Map<String, Value>, dim: usize) -> Result<InitialSet> {
    match obj.get("init") {
        None => Ok(InitialSet::full(dim)),
        Some(v) => init_from_json(v, dim),
    }
}

pub fn system_from_json(doc: &Value) -> Result<DescriptorSystem> {
    let obj = object(doc, "system")?;
    let n = cols_of(obj, "A").max(cols_of(obj, "E"));
    let e = matrix_field(obj, "E", n)?;
    let a = matrix_field(obj, "A", n)?;
    let b = matrix_field(obj, "B", 0)?;
    let c = matrix_field(obj, "C", n)?;
    let init = init_field(obj, n)?;
    DescriptorSystem::new(e, a, b, c, init)
}

pub fn system_to_json(sys: &DescriptorSystem) -> Value {
    json!({
        "E": matrix_to_json(sys.e()),
        "A": matrix_to_json(sys.a()),
        "B": matrix_to_json(sys.b()),
        "C": matrix_to_json(sys.c()),
        "init": init_to_json(sys.init()),
    })
}

/// Controller matrices. A file with empty `Ec`, `Ac` and `Bc` is the empty
/// controller; its column counts are fixed when it meets a plant.
pub fn controller_from_json(doc: &Value) -> Result<Controller> {
    let obj = object(doc, "controller")?;
    let n = cols_of(obj, "Ec").max(cols_of(obj, "Ac"));
    let ec = matrix_field(obj, "Ec", n)?;
    let ac = matrix_field(obj, "Ac", n)?;
    let bc = matrix_field(obj, "Bc", 0)?;
    Controller::new(ec, ac, bc)
}

pub fn controller_to_json(ctrl: &Controller) -> Value {
    json!({
        "Ec": matrix_to_json(ctrl.ec()),
        "Ac": matrix_to_json(ctrl.ac()),
        "Bc": matrix_to_json(ctrl.bc()),
    })
}

pub fn dv_from_json(doc: &Value) -> Result<DrivingVariableSystem> {
    let obj = object(doc, "DV system")?;
    let n = cols_of(obj, "Ad");
    let ps = cols_of(obj, "Bd").max(cols_of(obj, "Du"));
    let ad = matrix_field(obj, "Ad", n)?;
    let bd = matrix_field(obj, "Bd", ps)?;
    let cu = matrix_field(obj, "Cu", n)?;
    let du = matrix_field(obj, "Du", ps)?;
    let c = matrix_field(obj, "C", n)?;
    let init = init_field(obj, n)?;
    DrivingVariableSystem::new(ad, bd, cu, du, c, init)
}

pub fn dv_to_json(dv: &DrivingVariableSystem) -> Value {
    json!({
        "Ad": matrix_to_json(dv.ad()),
        "Bd": matrix_to_json(dv.bd()),
        "Cu": matrix_to_json(dv.cu()),
        "Du": matrix_to_json(dv.du()),
        "C": matrix_to_json(dv.c()),
        "init": init_to_json(dv.init()),
    })
}

pub fn relation_from_json(doc: &Value) -> Result<LinearStateMap> {
    let obj = object(doc, "relation")?;
    Ok(LinearStateMap::new(matrix_field(obj, "H", 0)?))
}

pub fn relation_to_json(rel: &LinearStateMap) -> Value {
    json!({ "H": matrix_to_json(rel.h()) })
}

/// True if the document looks like a refined controller rather than a
/// descriptor controller.
pub fn is_refined_document(doc: &Value) -> bool {
    doc.get("Kz").is_some()
}

pub fn refined_from_json(doc: &Value) -> Result<RefinedController> {
    let obj = object(doc, "refined controller")?;
    let na = rows_of(obj, "Kz");
    let n = cols_of(obj, "Ad");
    let ps = cols_of(obj, "Bd");
    let ps_a = cols_of(obj, "Bda");
    let kz = matrix_field(obj, "Kz", na)?;
    let p = matrix_field(obj, "P", na)?;
    let g = matrix_field(obj, "G", na)?;
    let drift = matrix_field(obj, "drift", n)?;
    let bda = matrix_field(obj, "Bda", ps_a)?;
    let bd = matrix_field(obj, "Bd", ps)?;
    let ad = matrix_field(obj, "Ad", n)?;
    let cu = matrix_field(obj, "Cu", n)?;
    let du = matrix_field(obj, "Du", ps)?;
    let h = matrix_field(obj, "H", n)?;
    RefinedController::new(
        kz,
        p,
        InterfaceMap::new(g, drift, bda)?,
        bd,
        ad,
        cu,
        du,
        LinearStateMap::new(h),
    )
}

pub fn refined_to_json(rc: &RefinedController) -> Value {
    let iface = rc.interface();
    json!({
        "Kz": matrix_to_json(rc.kz()),
        "P": matrix_to_json(rc.schedule()),
        "G": matrix_to_json(iface.g()),
        "drift": matrix_to_json(iface.drift()),
        "Bda": matrix_to_json(iface.bda()),
        "Bd": matrix_to_json(rc.bd()),
        "Ad": matrix_to_json(rc.ad()),
        "Cu": matrix_to_json(rc.cu()),
        "Du": matrix_to_json(rc.du()),
        "H": matrix_to_json(rc.relation().h()),
    })
}

/// Initial states for batch runs: either a bare array of points or an object
/// with a `"points"` field.
pub fn points_from_json(doc: &Value) -> Result<Vec<Vector>> {
    let arr = match doc {
        Value::Array(a) => a,
        Value::Object(o) => o
            .get("points")
            .and_then(Value::as_array)
            .ok_or_else(|| parse_err("points", "expected an array of points"))?,
        _ => return Err(parse_err("<root>", "expected an array of points")),
    };
    arr.iter()
        .enumerate()
        .map(|(i, p)| vector_from_json(p, &format!("points[{i}]")))
        .collect()
}

pub fn load_system(path: impl AsRef<Path>) -> Result<DescriptorSystem> {
    system_from_json(&read_document(path.as_ref())?)
}

pub fn save_system(sys: &DescriptorSystem, path: impl AsRef<Path>) -> Result<()> {
    write_document(path.as_ref(), &system_to_json(sys))
}

pub fn load_controller(path: impl AsRef<Path>) -> Result<Controller> {
    controller_from_json(&read_document(path.as_ref())?)
}

pub fn save_controller(ctrl: &Controller, path: impl AsRef<Path>) -> Result<()> {
    write_document(path.as_ref(), &controller_to_json(ctrl))
}

pub fn load_dv(path: impl AsRef<Path>) -> Result<DrivingVariableSystem> {
    dv_from_json(&read_document(path.as_ref())?)
}

pub fn save_dv(dv: &DrivingVariableSystem, path: impl AsRef<Path>) -> Result<()> {
    write_document(path.as_ref(), &dv_to_json(dv))
}

pub fn load_relation(path: impl AsRef<Path>) -> Result<LinearStateMap> {
    relation_from_json(&read_document(path.as_ref())?)
}

pub fn save_relation(rel: &LinearStateMap, path: impl AsRef<Path>) -> Result<()> {
    write_document(path.as_ref(), &relation_to_json(rel))
}

pub fn load_refined(path: impl AsRef<Path>) -> Result<RefinedController> {
    refined_from_json(&read_document(path.as_ref())?)
}

pub fn save_refined(rc: &RefinedController, path: impl AsRef<Path>) -> Result<()> {
    write_document(path.as_ref(), &refined_to_json(rc))
}

pub fn load_points(path: impl AsRef<Path>) -> Result<Vec<Vector>> {
    points_from_json(&read_document(path.as_ref())?)
}

/// Loads any JSON document; used where the file kind is decided by content.
pub fn load_document(path: impl AsRef<Path>) -> Result<Value> {
    read_document(path.as_ref())
}

/// Writes `t,u1..up,x1..xn,y1..yk`, one row per time step. The final state
/// row has empty input columns.
pub fn write_trajectory_csv<W: Write>(traj: &Trajectory, out: W) -> Result<()> {
    let n = traj.x.first().map_or(0, Vector::len);
    let p = traj.u.first().map_or(0, Vector::len);
    let k = traj.y.first().map_or(0, Vector::len);
    let mut w = csv::Writer::from_writer(out);
    let mut header = vec!["t".to_string()];
    header.extend((1..=p).map(|i| format!("u{i}")));
    header.extend((1..=n).map(|i| format!("x{i}")));
    header.extend((1..=k).map(|i| format!("y{i}")));
    w.write_record(&header).map_err(csv_err)?;
    for (t, x) in traj.x.iter().enumerate() {
        let mut rec = vec![t.to_string()];
        match traj.u.get(t) {
            Some(u) => rec.extend(u.iter().map(f64::to_string)),
            None => rec.extend(std::iter::repeat_n(String::new(), p)),
        }
        rec.extend(x.iter().map(f64::to_string));
        match traj.y.get(t) {
            Some(y) => rec.extend(y.iter().map(f64::to_string)),
            None => rec.extend(std::iter::repeat_n(String::new(), k)),
        }
        w.write_record(&rec).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::Io(io),
        other => Error::InvalidInput(format!("csv: {other:?}")),
    }
}

pub fn save_trajectory_csv(traj: &Trajectory, path: impl AsRef<Path>) -> Result<()> {
    let file = fs::File::create(path)?;
    write_trajectory_csv(traj, file)
}
