//! ASCII PLY point clouds with optional per-vertex `label` and `saliency`.

use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::types::{PartLabels, PointCloud, SaliencyWeights};

/// A cloud together with whatever per-point attributes its file carried.
#[derive(Clone, Debug, PartialEq)]
pub struct CloudData {
    pub cloud: PointCloud,
    pub part_labels: Option<PartLabels>,
    pub saliency: Option<SaliencyWeights>,
}

impl CloudData {
    pub fn new(cloud: PointCloud) -> Self {
        Self {
            cloud,
            part_labels: None,
            saliency: None,
        }
    }

    /// Gathers points and their attributes at `indices`.
    pub fn select(&self, indices: &[usize]) -> Result<Self> {
        Ok(Self {
            cloud: self.cloud.select(indices)?,
            part_labels: self
                .part_labels
                .as_ref()
                .map(|p| PartLabels(indices.iter().map(|&i| p.0[i]).collect())),
            saliency: match &self.saliency {
                Some(s) => Some(SaliencyWeights::new(
                    indices.iter().map(|&i| s.values()[i]).collect(),
                )?),
                None => None,
            },
        })
    }
}

#[derive(Debug)]
enum Property {
    Scalar { name: String, double: bool },
    List { name: String },
}

#[derive(Debug)]
struct Element {
    name: String,
    count: usize,
    properties: Vec<Property>,
}

fn scalar_kind(ty: &str) -> Option<bool> {
    match ty {
        "double" | "float64" => Some(true),
        "float" | "float32" | "char" | "uchar" | "short" | "ushort" | "int" | "uint" | "int8"
        | "uint8" | "int16" | "uint16" | "int32" | "uint32" => Some(false),
        _ => None,
    }
}

fn parse_header<'a>(lines: &mut impl Iterator<Item = (usize, &'a str)>) -> Result<Vec<Element>> {
    match lines.next() {
        Some((_, "ply")) => {}
        Some((no, _)) => return Err(Error::parse(no, "missing \"ply\" magic")),
        None => return Err(Error::parse(1, "empty input")),
    }
    let mut elements: Vec<Element> = Vec::new();
    let mut saw_format = false;
    for (no, line) in lines.by_ref() {
        let tokens: Vec<&str> = line.split_whitespace().collect();
        match tokens.as_slice() {
            ["end_header"] => {
                if !saw_format {
                    return Err(Error::parse(no, "missing format line"));
                }
                return Ok(elements);
            }
            ["format", "ascii", _] => saw_format = true,
            ["format", kind, ..] => {
                return Err(Error::UnsupportedFormat(format!(
                    "PLY format {kind} (only ascii is supported)"
                )))
            }
            ["comment", ..] | ["obj_info", ..] | [] => {}
            ["element", name, count] => {
                let count = count
                    .parse()
                    .map_err(|_| Error::parse(no, format!("bad element count {count:?}")))?;
                elements.push(Element {
                    name: name.to_string(),
                    count,
                    properties: Vec::new(),
                });
            }
            ["property", "list", _, _, name] => elements
                .last_mut()
                .ok_or_else(|| Error::parse(no, "property before any element"))?
                .properties
                .push(Property::List {
                    name: name.to_string(),
                }),
            ["property", ty, name] => {
                let double = scalar_kind(ty)
                    .ok_or_else(|| Error::parse(no, format!("unknown property type {ty:?}")))?;
                elements
                    .last_mut()
                    .ok_or_else(|| Error::parse(no, "property before any element"))?
                    .properties
                    .push(Property::Scalar {
                        name: name.to_string(),
                        double,
                    });
            }
            _ => {
                return Err(Error::parse(
                    no,
                    format!("unrecognized header line {line:?}"),
                ))
            }
        }
    }
    Err(Error::parse(0, "missing end_header"))
}

fn field<T: std::str::FromStr>(no: usize, token: Option<&str>, what: &str) -> Result<T> {
    token
        .and_then(|t| t.parse().ok())
        .ok_or_else(|| Error::parse(no, format!("bad or missing {what}")))
}

/// Parses an ASCII PLY file. The `vertex` element must carry `x`, `y`, `z`.
pub fn parse_ply(text: &str) -> Result<CloudData> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()));
    let elements = parse_header(&mut lines)?;
    let mut body = lines.filter(|(_, l)| !l.is_empty());

    let mut points = None;
    let mut labels = None;
    let mut saliency = None;
    for element in &elements {
        if element.name != "vertex" {
            for _ in 0..element.count {
                body.next().ok_or_else(|| {
                    Error::parse(0, format!("truncated {} element", element.name))
                })?;
            }
            continue;
        }
        let position = |wanted: &str| {
            element
                .properties
                .iter()
                .position(|p| matches!(p, Property::Scalar { name, .. } if name == wanted))
        };
        let (Some(px), Some(py), Some(pz)) = (position("x"), position("y"), position("z")) else {
            return Err(Error::UnsupportedFormat(
                "vertex element lacks x/y/z properties".into(),
            ));
        };
        let label_at = position("label");
        let saliency_at = position("saliency");
        let mut pts = Vec::with_capacity(element.count);
        let mut lbl = Vec::new();
        let mut sal = Vec::new();
        for v in 0..element.count {
            let (no, line) = body.next().ok_or_else(|| {
                Error::parse(0, format!("missing vertex {} of {}", v + 1, element.count))
            })?;
            let mut tokens = line.split_whitespace();
            let mut values: Vec<&str> = Vec::with_capacity(element.properties.len());
            for prop in &element.properties {
                match prop {
                    Property::Scalar { name, .. } => {
                        values.push(
                            tokens.next().ok_or_else(|| {
                                Error::parse(no, format!("missing property {name}"))
                            })?,
                        );
                    }
                    Property::List { name } => {
                        let len: usize = field(no, tokens.next(), name)?;
                        for _ in 0..len {
                            tokens.next();
                        }
                        values.push("");
                    }
                }
            }
            let coord = |at: usize| -> Result<f32> {
                let c: f32 = field(no, Some(values[at]), "coordinate")?;
                if !c.is_finite() {
                    return Err(Error::parse(no, "non-finite coordinate"));
                }
                Ok(c)
            };
            pts.push([coord(px)?, coord(py)?, coord(pz)?]);
            if let Some(at) = label_at {
                lbl.push(field::<i32>(no, Some(values[at]), "label")?);
            }
            if let Some(at) = saliency_at {
                let double = matches!(
                    &element.properties[at],
                    Property::Scalar { double: true, .. }
                );
                let value = if double {
                    field::<f64>(no, Some(values[at]), "saliency")?
                } else {
                    field::<f32>(no, Some(values[at]), "saliency")? as f64
                };
                sal.push(value);
            }
        }
        points = Some(pts);
        labels = label_at.map(|_| PartLabels(lbl));
        saliency = saliency_at.map(|_| sal);
    }

    let points = points.ok_or_else(|| Error::UnsupportedFormat("no vertex element".into()))?;
    Ok(CloudData {
        cloud: PointCloud::new(points)?,
        part_labels: labels,
        saliency: saliency.map(SaliencyWeights::new).transpose()?,
    })
}

pub(crate) fn push_float(out: &mut String, value: f32) {
    write!(out, "{value:.8e}").expect("writing to a String cannot fail");
}

/// Serializes a cloud as ASCII PLY, nine significant digits per float.
pub fn write_ply(
    cloud: &PointCloud,
    part_labels: Option<&PartLabels>,
    saliency: Option<&SaliencyWeights>,
) -> Result<String> {
    if let Some(p) = part_labels {
        p.check_aligned(cloud)?;
    }
    if let Some(s) = saliency {
        crate::types::check_len("saliency vs cloud", s.len(), cloud.len())?;
    }
    let mut out = String::with_capacity(64 + cloud.len() * 48);
    out.push_str("ply\nformat ascii 1.0\n");
    writeln!(out, "element vertex {}", cloud.len()).expect("infallible");
    out.push_str("property float x\nproperty float y\nproperty float z\n");
    if part_labels.is_some() {
        out.push_str("property int label\n");
    }
    if saliency.is_some() {
        out.push_str("property float saliency\n");
    }
    out.push_str("end_header\n");
    for (i, p) in cloud.points().iter().enumerate() {
        push_float(&mut out, p[0]);
        out.push(' ');
        push_float(&mut out, p[1]);
        out.push(' ');
        push_float(&mut out, p[2]);
        if let Some(labels) = part_labels {
            write!(out, " {}", labels.0[i]).expect("infallible");
        }
        if let Some(s) = saliency {
            out.push(' ');
            push_float(&mut out, s.values()[i] as f32);
        }
        out.push('\n');
    }
    Ok(out)
}
