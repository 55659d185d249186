//! Result documents and their deterministic JSON encoding.

use std::io;

use agler_core::kernel::ScalarFunction;
use agler_core::{CMatrix, CVector, C64};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Ok,
    Infeasible,
    Error,
}

impl Status {
    pub fn exit_code(&self, error: Option<&ErrorBody>) -> i32 {
        match (self, error) {
            (Status::Ok, _) => 0,
            (Status::Infeasible, _) => 1,
            (Status::Error, Some(e)) if e.code == "numerical-failure" || e.code == "fit-failure" => 3,
            (Status::Error, _) => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CommandResult {
    pub command: String,
    pub status: Status,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    pub certificates: Value,
    pub version: String,
    pub tolerances: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorBody>,
}

impl CommandResult {
    pub fn exit_code(&self) -> i32 {
        self.status.exit_code(self.error.as_ref())
    }

    /// Compact JSON with every float printed to 17 significant digits.
    pub fn to_json(&self) -> String {
        let mut out = Vec::new();
        let mut ser = serde_json::Serializer::with_formatter(&mut out, FixedFloats);
        self.serialize(&mut ser).expect("values are always serializable");
        String::from_utf8(out).expect("serde_json writes UTF-8")
    }
}

/// `serde_json` formatter printing `f64` as `{:.16e}`.
struct FixedFloats;

impl serde_json::ser::Formatter for FixedFloats {
    fn write_f64<W: ?Sized + io::Write>(&mut self, writer: &mut W, value: f64) -> io::Result<()> {
        if value.is_finite() {
            write!(writer, "{value:.16e}")
        } else {
            writer.write_all(b"null")
        }
    }
}

/// A float, or `null` when it is not finite.
pub fn num(v: f64) -> Value {
    serde_json::Number::from_f64(v).map_or(Value::Null, Value::Number)
}

pub fn cnum(z: C64) -> Value {
    json!([num(z.re), num(z.im)])
}

pub fn nums(v: &[f64]) -> Value {
    Value::Array(v.iter().map(|x| num(*x)).collect())
}

pub fn matrix(m: &CMatrix) -> Value {
    Value::Array(
        (0..m.nrows())
            .map(|r| Value::Array((0..m.ncols()).map(|c| cnum(m[(r, c)])).collect()))
            .collect(),
    )
}

pub fn vector(v: &CVector) -> Value {
    Value::Array(v.iter().map(|z| cnum(*z)).collect())
}

/// A function as `[{label, value}]` in point order.
pub fn function(f: &ScalarFunction) -> Value {
    Value::Array(
        f.iter()
            .map(|(p, v)| json!({"label": p.label(), "value": cnum(*v)}))
            .collect(),
    )
}
