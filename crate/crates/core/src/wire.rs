//! JSON representations shared by the library and the command line.
//!
//! Complex numbers are `[re, im]`; matrices are
//! `{"rows": r, "cols": c, "data": [[re, im], ..]}` in row-major order.

use num_complex::Complex64;
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::Error;
use crate::matcore::CMatrix;
use crate::toeplitz::{BlockToeplitz, TrigMatrixPoly};

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MatrixWire {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl Serialize for CMatrix {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        MatrixWire { rows: self.rows(), cols: self.cols(), data: self.data().to_vec() }.serialize(s)
    }
}

impl<'de> Deserialize<'de> for CMatrix {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = MatrixWire::deserialize(d)?;
        let len = w.data.len();
        CMatrix::from_vec(w.rows, w.cols, w.data).ok_or_else(|| {
            serde::de::Error::custom(format!("matrix declares {}x{} but has {len} entries", w.rows, w.cols))
        })
    }
}

#[derive(Serialize, Deserialize)]
pub(crate) struct ToeplitzWire {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    kind: Option<String>,
    n: usize,
    p: usize,
    coeffs: Vec<CMatrix>,
}

#[derive(Serialize, Deserialize)]
pub(crate) struct TrigPolyWire {
    #[serde(default)]
    kind: Option<String>,
    n: usize,
    p: usize,
    coeffs: Vec<CMatrix>,
}

fn check_kind(kind: &Option<String>, expected: &str) -> Result<(), Error> {
    match kind.as_deref() {
        None => Ok(()),
        Some(k) if k == expected => Ok(()),
        Some(k) => Err(Error::BadParams(format!("expected kind \"{expected}\", found \"{k}\""))),
    }
}

impl TryFrom<ToeplitzWire> for BlockToeplitz {
    type Error = Error;
    fn try_from(w: ToeplitzWire) -> Result<Self, Error> {
        check_kind(&w.kind, "toeplitz")?;
        BlockToeplitz::new(w.n, w.p, w.coeffs)
    }
}

impl From<BlockToeplitz> for ToeplitzWire {
    fn from(t: BlockToeplitz) -> Self {
        let (n, p) = (t.n(), t.p());
        ToeplitzWire { kind: Some("toeplitz".into()), n, p, coeffs: t.into_coeffs() }
    }
}

impl TryFrom<TrigPolyWire> for TrigMatrixPoly {
    type Error = Error;
    fn try_from(w: TrigPolyWire) -> Result<Self, Error> {
        check_kind(&w.kind, "trigpoly")?;
        TrigMatrixPoly::new(w.n, w.p, w.coeffs)
    }
}

impl From<TrigMatrixPoly> for TrigPolyWire {
    fn from(f: TrigMatrixPoly) -> Self {
        TrigPolyWire { kind: Some("trigpoly".into()), n: f.n(), p: f.p(), coeffs: f.coeffs().to_vec() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matrix_round_trip() {
        let m = CMatrix::from_fn(2, 3, |i, j| Complex64::new(i as f64, -(j as f64) * 0.5));
        let s = serde_json::to_string(&m).unwrap();
        assert!(s.starts_with("{\"rows\":2,\"cols\":3,\"data\":[[0.0,-0.0]"));
        let back: CMatrix = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }

    #[test]
    fn matrix_shape_checked() {
        let r: Result<CMatrix, _> = serde_json::from_str(r#"{"rows":2,"cols":2,"data":[[1,0]]}"#);
        assert!(r.is_err());
    }

    #[test]
    fn toeplitz_kind_optional_and_checked() {
        let body = r#""n":1,"p":1,"coeffs":[{"rows":1,"cols":1,"data":[[1,0]]}]"#;
        let t: BlockToeplitz = serde_json::from_str(&format!("{{{body}}}")).unwrap();
        assert_eq!(t, BlockToeplitz::order_unit(1, 1));
        let bad: Result<BlockToeplitz, _> = serde_json::from_str(&format!("{{\"kind\":\"trigpoly\",{body}}}"));
        assert!(bad.is_err());
        let f: TrigMatrixPoly = serde_json::from_str(&format!("{{\"kind\":\"trigpoly\",{body}}}")).unwrap();
        assert_eq!(serde_json::to_value(&f).unwrap()["kind"], "trigpoly");
    }

    #[test]
    fn wrong_coefficient_count_rejected() {
        let r: Result<BlockToeplitz, _> =
            serde_json::from_str(r#"{"n":2,"p":1,"coeffs":[{"rows":1,"cols":1,"data":[[1,0]]}]}"#);
        assert!(r.is_err());
    }
}
