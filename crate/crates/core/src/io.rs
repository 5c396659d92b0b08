//! Text documents for states and distributions.
//!
//! A state document is a JSON object with the fields `version`, `labels`,
//! `dims` and `matrix`, the last being a list of rows of `[re, im]` pairs.
//! Writes are canonical: fixed field order and every float printed with 17
//! significant digits, so equal states give byte-identical files. Channel
//! documents follow the same conventions.

use std::fmt::Write as _;
use std::path::Path;

use serde::Deserialize;

use crate::error::{Error, Result};
use crate::channels::QuantumChannel;
use crate::linalg::{c, Mat, SubsystemLayout};
use crate::states::MultipartiteState;

pub const DOCUMENT_VERSION: u32 = 1;

/// `{:.16e}`: 17 significant digits, always parseable as a JSON number.
pub fn canonical_float(x: f64) -> String {
    format!("{x:.16e}")
}

fn json_str(s: &str) -> String {
    serde_json::to_string(s).expect("strings always serialize")
}

fn header(out: &mut String, layout: &SubsystemLayout) {
    let labels: Vec<String> = layout.labels().iter().map(|l| json_str(l)).collect();
    let dims: Vec<String> = layout.dims().iter().map(|d| d.to_string()).collect();
    let _ = write!(
        out,
        "{{\n  \"version\": {DOCUMENT_VERSION},\n  \"labels\": [{}],\n  \"dims\": [{}],\n",
        labels.join(", "),
        dims.join(", ")
    );
}

pub fn state_to_string(state: &MultipartiteState) -> String {
    let mut out = String::new();
    header(&mut out, state.layout());
    out.push_str("  \"matrix\": [\n");
    matrix_rows(&mut out, state.matrix(), "    ");
    out.push_str("  ]\n}\n");
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct StateDoc {
    version: u32,
    labels: Vec<String>,
    dims: Vec<usize>,
    matrix: Vec<Vec<[f64; 2]>>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct DistributionDoc {
    version: u32,
    labels: Vec<String>,
    dims: Vec<usize>,
    probs: Vec<f64>,
}

fn check_version(v: u32) -> Result<()> {
    if v != DOCUMENT_VERSION {
        return Err(Error::Parse(format!("unsupported document version {v}")));
    }
    Ok(())
}

/// Parses and validates a state document.
pub fn state_from_str(text: &str) -> Result<MultipartiteState> {
    let doc: StateDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_version(doc.version)?;
    let layout = SubsystemLayout::new(doc.labels, &doc.dims)?;
    let n = layout.total_dim();
    let m = parse_matrix(&doc.matrix, n, n, &format!("matrix for dims {:?}", layout.dims()))?;
    MultipartiteState::new(m, layout)
}

pub fn save_state(state: &MultipartiteState, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, state_to_string(state))?;
    Ok(())
}

pub fn load_state(path: impl AsRef<Path>) -> Result<MultipartiteState> {
    state_from_str(&std::fs::read_to_string(path)?)
}

/// Distribution documents share the state layout header; `probs` lists the
/// joint probabilities in row-major order over `dims`.
pub fn distribution_to_string(layout: &SubsystemLayout, probs: &[f64]) -> String {
    let mut out = String::new();
    header(&mut out, layout);
    let p: Vec<String> = probs.iter().map(|&x| canonical_float(x)).collect();
    let _ = write!(out, "  \"probs\": [{}]\n}}\n", p.join(", "));
    out
}

pub fn distribution_from_str(text: &str) -> Result<(SubsystemLayout, Vec<f64>)> {
    let doc: DistributionDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_version(doc.version)?;
    let layout = SubsystemLayout::new(doc.labels, &doc.dims)?;
    if doc.probs.len() != layout.total_dim() {
        return Err(Error::Parse(format!(
            "{} probabilities for total dimension {}",
            doc.probs.len(),
            layout.total_dim()
        )));
    }
    if doc.probs.iter().any(|p| !p.is_finite()) {
        return Err(Error::Parse("non-finite probability".into()));
    }
    Ok((layout, doc.probs))
}

fn matrix_rows(out: &mut String, m: &Mat, indent: &str) {
    for i in 0..m.nrows() {
        let row: Vec<String> = (0..m.ncols())
            .map(|j| {
                let z = m[(i, j)];
                format!("[{}, {}]", canonical_float(z.re), canonical_float(z.im))
            })
            .collect();
        let sep = if i + 1 == m.nrows() { "" } else { "," };
        let _ = writeln!(out, "{indent}[{}]{sep}", row.join(", "));
    }
}

fn parse_matrix(rows: &[Vec<[f64; 2]>], nrows: usize, ncols: usize, what: &str) -> Result<Mat> {
    if rows.len() != nrows || rows.iter().any(|r| r.len() != ncols) {
        return Err(Error::Parse(format!("{what} must be {nrows} x {ncols}")));
    }
    let mut m = Mat::zeros(nrows, ncols);
    for (i, row) in rows.iter().enumerate() {
        for (j, [re, im]) in row.iter().enumerate() {
            if !re.is_finite() || !im.is_finite() {
                return Err(Error::Parse(format!("{what} entry ({i}, {j}) is not finite")));
            }
            m[(i, j)] = c(*re, *im);
        }
    }
    Ok(m)
}

/// Channel documents list the input and output layouts and the Kraus
/// operators, each as rows of `[re, im]` pairs.
pub fn channel_to_string(channel: &QuantumChannel) -> String {
    let list = |xs: &[String]| xs.iter().map(|l| json_str(l)).collect::<Vec<_>>().join(", ");
    let dims = |xs: &[usize]| xs.iter().map(|d| d.to_string()).collect::<Vec<_>>().join(", ");
    let mut out = String::new();
    let _ = write!(
        out,
        "{{\n  \"version\": {DOCUMENT_VERSION},\n  \"id\": {},\n  \"in_labels\": [{}],\n  \"in_dims\": [{}],\n  \"out_labels\": [{}],\n  \"out_dims\": [{}],\n  \"kraus\": [\n",
        json_str(channel.id()),
        list(channel.in_layout().labels()),
        dims(channel.in_layout().dims()),
        list(channel.out_layout().labels()),
        dims(channel.out_layout().dims()),
    );
    let n = channel.kraus().len();
    for (k, m) in channel.kraus().iter().enumerate() {
        out.push_str("    [\n");
        matrix_rows(&mut out, m, "      ");
        out.push_str(if k + 1 == n { "    ]\n" } else { "    ],\n" });
    }
    out.push_str("  ]\n}\n");
    out
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ChannelDoc {
    version: u32,
    id: String,
    in_labels: Vec<String>,
    in_dims: Vec<usize>,
    out_labels: Vec<String>,
    out_dims: Vec<usize>,
    kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

pub fn channel_from_str(text: &str) -> Result<QuantumChannel> {
    let doc: ChannelDoc = serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    check_version(doc.version)?;
    let in_layout = SubsystemLayout::new(doc.in_labels, &doc.in_dims)?;
    let out_layout = SubsystemLayout::new(doc.out_labels, &doc.out_dims)?;
    let (din, dout) = (in_layout.total_dim(), out_layout.total_dim());
    let kraus = doc
        .kraus
        .iter()
        .map(|k| parse_matrix(k, dout, din, "Kraus operator"))
        .collect::<Result<Vec<_>>>()?;
    QuantumChannel::new(kraus, in_layout, out_layout, doc.id)
}

/// Serde adapter writing non-finite floats as the strings `"inf"`, `"-inf"`
/// and `"nan"`, which plain JSON cannot carry.
pub mod extended_float {
    use serde::{Deserialize, Deserializer, Serializer};

    #[derive(Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Num(f64),
        Text(String),
    }

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> std::result::Result<S::Ok, S::Error> {
        if x.is_finite() {
            s.serialize_f64(*x)
        } else {
            s.serialize_str(text(*x))
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Num(x) => Ok(x),
            Repr::Text(t) => parse(&t).ok_or_else(|| serde::de::Error::custom(format!("not a number: {t}"))),
        }
    }

    pub fn text(x: f64) -> &'static str {
        if x.is_nan() {
            "nan"
        } else if x > 0.0 {
            "inf"
        } else {
            "-inf"
        }
    }

    pub fn parse(t: &str) -> Option<f64> {
        match t {
            "inf" => Some(f64::INFINITY),
            "-inf" => Some(f64::NEG_INFINITY),
            "nan" => Some(f64::NAN),
            _ => None,
        }
    }

    /// Same for `Option<f64>`, `None` being `null`.
    pub mod option {
        use serde::{Deserialize, Deserializer, Serializer};

        pub fn serialize<S: Serializer>(x: &Option<f64>, s: S) -> std::result::Result<S::Ok, S::Error> {
            match x {
                Some(v) => super::serialize(v, s),
                None => s.serialize_none(),
            }
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Option<f64>, D::Error> {
            match Option::<super::Repr>::deserialize(d)? {
                None => Ok(None),
                Some(super::Repr::Num(x)) => Ok(Some(x)),
                Some(super::Repr::Text(t)) => super::parse(&t)
                    .map(Some)
                    .ok_or_else(|| serde::de::Error::custom(format!("not a number: {t}"))),
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::states::{named_state, random_state, Ensemble, NamedState, StateEnsembleSpec};

    #[test]
    fn state_round_trip_is_exact_and_canonical() {
        let s = random_state(&StateEnsembleSpec::new(Ensemble::BuresMixed, &[2, 3], 11)).unwrap();
        let text = state_to_string(&s);
        let back = state_from_str(&text).unwrap();
        assert_eq!(back.matrix(), s.matrix());
        assert_eq!(back.layout(), s.layout());
        assert_eq!(state_to_string(&back), text);
        assert!(text.starts_with("{\n  \"version\": 1,\n  \"labels\": [\"A\", \"B\"],"));
    }

    #[test]
    fn malformed_documents_are_rejected() {
        let bell = state_to_string(&named_state(NamedState::Bell).unwrap());
        assert!(matches!(state_from_str("{"), Err(Error::Parse(_))));
        let wrong_dims = bell.replace("\"dims\": [2, 2]", "\"dims\": [2, 3]");
        assert!(matches!(state_from_str(&wrong_dims), Err(Error::Parse(_))));
        let mm = state_to_string(&named_state(NamedState::MaximallyMixed(2)).unwrap());
        let not_unit = mm.replacen("5.0000000000000000e-1", "9.0000000000000000e-1", 1);
        assert!(matches!(state_from_str(&not_unit), Err(Error::InvalidState(_))));
        let dup = bell.replace("[\"A\", \"B\"]", "[\"A\", \"A\"]");
        assert!(matches!(state_from_str(&dup), Err(Error::InvalidLayout(_))));
    }

    #[test]
    fn channel_round_trip() {
        let layout = SubsystemLayout::from_pairs(&[("X", 2)]).unwrap();
        let ch = crate::channels::depolarizing_channel(&layout, 0.3).unwrap();
        let text = channel_to_string(&ch);
        let back = channel_from_str(&text).unwrap();
        assert_eq!(back.kraus(), ch.kraus());
        assert_eq!(back.id(), "depolarizing");
        assert_eq!(channel_to_string(&back), text);
        let broken = text.replacen("\"in_dims\": [2]", "\"in_dims\": [3]", 1);
        assert!(matches!(channel_from_str(&broken), Err(Error::Parse(_))));
    }

    #[derive(serde::Serialize, serde::Deserialize, Debug, PartialEq)]
    struct Floats {
        #[serde(with = "extended_float")]
        x: f64,
        #[serde(with = "extended_float::option")]
        y: Option<f64>,
    }

    #[test]
    fn non_finite_floats_round_trip_as_text() {
        let v = Floats {
            x: f64::INFINITY,
            y: Some(-1.5),
        };
        let text = serde_json::to_string(&v).unwrap();
        assert_eq!(text, r#"{"x":"inf","y":-1.5}"#);
        assert_eq!(serde_json::from_str::<Floats>(&text).unwrap(), v);
        let none: Floats = serde_json::from_str(r#"{"x":0.25,"y":null}"#).unwrap();
        assert_eq!(none.y, None);
        assert!(serde_json::from_str::<Floats>(r#"{"x":"big","y":null}"#).is_err());
    }

    #[test]
    fn distribution_round_trip() {
        let layout = SubsystemLayout::from_pairs(&[("X", 2), ("Y", 2)]).unwrap();
        let probs = vec![0.1, 0.2, 0.3, 0.4];
        let text = distribution_to_string(&layout, &probs);
        let (l, p) = distribution_from_str(&text).unwrap();
        assert_eq!(l, layout);
        assert_eq!(p, probs);
    }
}
