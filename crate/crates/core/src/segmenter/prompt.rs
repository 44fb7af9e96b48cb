use serde::{Deserialize, Serialize};

use super::SegmentError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PointPrompt {
    pub u: f64,
    pub v: f64,
    pub polarity: Polarity,
}

impl PointPrompt {
    pub fn positive(u: f64, v: f64) -> Self {
        Self { u, v, polarity: Polarity::Positive }
    }

    pub fn negative(u: f64, v: f64) -> Self {
        Self { u, v, polarity: Polarity::Negative }
    }

    /// Parses `"u,v,+"` or `"u,v,-"`.
    pub fn parse(s: &str) -> Result<Self, SegmentError> {
        let bad = || SegmentError::InvalidPrompt(format!("expected \"u,v,+|-\", got {s:?}"));
        let parts: Vec<&str> = s.split(',').map(str::trim).collect();
        let [u, v, pol] = parts.as_slice() else { return Err(bad()) };
        let polarity = match *pol {
            "+" => Polarity::Positive,
            "-" => Polarity::Negative,
            _ => return Err(bad()),
        };
        Ok(Self { u: u.parse().map_err(|_| bad())?, v: v.parse().map_err(|_| bad())?, polarity })
    }
}

/// Axis-aligned pixel box, inclusive of the pixel centers on its border.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxPrompt {
    pub u_min: f64,
    pub v_min: f64,
    pub u_max: f64,
    pub v_max: f64,
}

impl BoxPrompt {
    pub fn new(u_min: f64, v_min: f64, u_max: f64, v_max: f64) -> Self {
        Self { u_min, v_min, u_max, v_max }
    }

    pub fn xyxy(&self) -> [f64; 4] {
        [self.u_min, self.v_min, self.u_max, self.v_max]
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= self.u_min && u <= self.u_max && v >= self.v_min && v <= self.v_max
    }

    pub fn is_well_ordered(&self) -> bool {
        self.u_min <= self.u_max && self.v_min <= self.v_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScoredBox {
    #[serde(rename = "xyxy", with = "xyxy")]
    pub bbox: BoxPrompt,
    pub score: f64,
}

mod xyxy {
    use super::BoxPrompt;
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    pub fn serialize<S: Serializer>(b: &BoxPrompt, s: S) -> Result<S::Ok, S::Error> {
        b.xyxy().serialize(s)
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<BoxPrompt, D::Error> {
        let [a, b, c, e] = <[f64; 4]>::deserialize(d)?;
        Ok(BoxPrompt::new(a, b, c, e))
    }
}

/// Point and box prompts for one image.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PromptSet {
    pub points: Vec<PointPrompt>,
    #[serde(rename = "box", default, skip_serializing_if = "Option::is_none")]
    pub bbox: Option<BoxPrompt>,
}

impl PromptSet {
    pub fn from_points(points: Vec<PointPrompt>) -> Self {
        Self { points, bbox: None }
    }

    pub fn from_box(bbox: BoxPrompt) -> Self {
        Self { points: Vec::new(), bbox: Some(bbox) }
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty() && self.bbox.is_none()
    }

    pub fn positives(&self) -> impl Iterator<Item = &PointPrompt> {
        self.points.iter().filter(|p| p.polarity == Polarity::Positive)
    }

    pub fn negatives(&self) -> impl Iterator<Item = &PointPrompt> {
        self.points.iter().filter(|p| p.polarity == Polarity::Negative)
    }

    /// Checks every coordinate against the image rectangle and box ordering.
    pub fn validate(&self, width: u32, height: u32) -> Result<(), SegmentError> {
        let inside = |u: f64, v: f64| {
            u >= -0.5 && v >= -0.5 && u < width as f64 - 0.5 && v < height as f64 - 0.5
        };
        if let Some(p) = self.points.iter().find(|p| !inside(p.u, p.v)) {
            return Err(SegmentError::InvalidPrompt(format!(
                "point ({}, {}) outside {width}x{height} image",
                p.u, p.v
            )));
        }
        if let Some(b) = &self.bbox {
            if !b.is_well_ordered() || !inside(b.u_min, b.v_min) || !inside(b.u_max, b.v_max) {
                return Err(SegmentError::InvalidPrompt(format!("box {:?} invalid for {width}x{height}", b.xyxy())));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_cli_prompts() {
        assert_eq!(PointPrompt::parse("64,32,+").unwrap(), PointPrompt::positive(64.0, 32.0));
        assert_eq!(PointPrompt::parse("1.5, 2, -").unwrap(), PointPrompt::negative(1.5, 2.0));
        assert!(PointPrompt::parse("1,2").is_err());
        assert!(PointPrompt::parse("1,2,x").is_err());
    }

    #[test]
    fn validation() {
        let p = PromptSet::from_points(vec![PointPrompt::positive(3.0, 3.0)]);
        assert!(p.validate(4, 4).is_ok());
        assert!(p.validate(3, 4).is_err());
        let b = PromptSet::from_box(BoxPrompt::new(3.0, 0.0, 1.0, 2.0));
        assert!(b.validate(4, 4).is_err());
    }

    #[test]
    fn scored_box_wire_shape() {
        let b = ScoredBox { bbox: BoxPrompt::new(1.0, 2.0, 3.0, 4.0), score: 0.5 };
        let j = serde_json::to_string(&b).unwrap();
        assert_eq!(j, r#"{"xyxy":[1.0,2.0,3.0,4.0],"score":0.5}"#);
        assert_eq!(serde_json::from_str::<ScoredBox>(&j).unwrap(), b);
    }
}
