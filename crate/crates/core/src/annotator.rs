//! Supervisor-facing annotations: colour code, extreme-value flags and
//! change-point tags for each cycle.

use serde::{Deserialize, Serialize};

use crate::changepoint::{binary_segmentation, Segmentation, SegmentationParams};
use crate::domain::AntCycle;

pub const EXTREME_MAX: f64 = 195.0;
pub const EXTREME_MIN: f64 = 174.0;
pub const EXTREME_RANGE: f64 = 13.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Color {
    #[default]
    None,
    Orange,
    Red,
    Blue,
    Violet,
}

impl Color {
    pub fn as_str(self) -> &'static str {
        match self {
            Color::None => "none",
            Color::Orange => "orange",
            Color::Red => "red",
            Color::Blue => "blue",
            Color::Violet => "violet",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorRule {
    /// first reading below 174
    Violet,
    /// any reading above 188
    Red,
    /// every reading in (184, 188]
    Orange,
    /// every reading below 180
    Blue,
}

impl ColorRule {
    fn matches(self, r: &[f64]) -> bool {
        match self {
            ColorRule::Violet => r[0] < 174.0,
            ColorRule::Red => r.iter().any(|&t| t > 188.0),
            ColorRule::Orange => r.iter().all(|&t| t > 184.0 && t <= 188.0),
            ColorRule::Blue => r.iter().all(|&t| t < 180.0),
        }
    }

    fn color(self) -> Color {
        match self {
            ColorRule::Violet => Color::Violet,
            ColorRule::Red => Color::Red,
            ColorRule::Orange => Color::Orange,
            ColorRule::Blue => Color::Blue,
        }
    }
}

/// Order in which colour rules are tried; the first match wins.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ColorPrecedence(pub Vec<ColorRule>);

impl Default for ColorPrecedence {
    fn default() -> Self {
        Self(vec![
            ColorRule::Violet,
            ColorRule::Red,
            ColorRule::Orange,
            ColorRule::Blue,
        ])
    }
}

impl ColorPrecedence {
    pub fn color_of(&self, readings: &[f64]) -> Color {
        self.0
            .iter()
            .find(|rule| rule.matches(readings))
            .map_or(Color::None, |rule| rule.color())
    }
}

/// Colour of a cycle under the default precedence (violet, red, orange, blue).
pub fn color_code(cycle: &AntCycle) -> Color {
    ColorPrecedence::default().color_of(&cycle.readings)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct ExtremeFlags {
    /// max >= 195
    pub max: bool,
    /// min <= 174
    pub min: bool,
    /// max - min >= 13
    pub range: bool,
}

pub fn extreme_flags(cycle: &AntCycle) -> ExtremeFlags {
    flags_for(cycle.max(), cycle.min())
}

fn flags_for(max: f64, min: f64) -> ExtremeFlags {
    ExtremeFlags {
        max: max >= EXTREME_MAX,
        min: min <= EXTREME_MIN,
        range: max - min >= EXTREME_RANGE,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
pub struct Annotation {
    pub color: Color,
    #[serde(rename = "flag_M")]
    pub flag_max: bool,
    #[serde(rename = "flag_m")]
    pub flag_min: bool,
    #[serde(rename = "flag_R")]
    pub flag_range: bool,
    pub changepoints: Vec<usize>,
    pub cp_count: u8,
}

impl Annotation {
    pub fn flags(&self) -> ExtremeFlags {
        ExtremeFlags {
            max: self.flag_max,
            min: self.flag_min,
            range: self.flag_range,
        }
    }
}

pub fn annotate(cycle: &AntCycle, segmentation: &Segmentation) -> Annotation {
    annotate_with(cycle, segmentation, &ColorPrecedence::default())
}

fn annotate_with(
    cycle: &AntCycle,
    segmentation: &Segmentation,
    precedence: &ColorPrecedence,
) -> Annotation {
    let flags = extreme_flags(cycle);
    Annotation {
        color: precedence.color_of(&cycle.readings),
        flag_max: flags.max,
        flag_min: flags.min,
        flag_range: flags.range,
        changepoints: segmentation.changepoints.clone(),
        cp_count: segmentation.count() as u8,
    }
}

/// Runs change-point detection and assembles the annotation in one step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Annotator {
    pub segmentation: SegmentationParams,
    pub colors: ColorPrecedence,
}

impl Annotator {
    pub fn new(segmentation: SegmentationParams) -> Self {
        Self {
            segmentation,
            colors: ColorPrecedence::default(),
        }
    }

    pub fn segment(&self, cycle: &AntCycle) -> Segmentation {
        let p = &self.segmentation;
        binary_segmentation(
            &cycle.readings,
            p.penalty,
            p.min_segment_length,
            p.max_changepoints,
        )
    }

    pub fn annotate(&self, cycle: &AntCycle) -> Annotation {
        annotate_with(cycle, &self.segment(cycle), &self.colors)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::ProductionCalendar;
    use chrono::{FixedOffset, TimeZone};

    fn cycle(r: [f64; 8]) -> AntCycle {
        let ts = FixedOffset::east_opt(0)
            .unwrap()
            .with_ymd_and_hms(2025, 4, 7, 10, 0, 0)
            .unwrap();
        ProductionCalendar::default().validate_cycle(&r, ts).unwrap()
    }

    #[test]
    fn color_examples() {
        assert_eq!(
            color_code(&cycle([185., 186., 187., 185., 186., 187., 186., 185.])),
            Color::Orange
        );
        assert_eq!(
            color_code(&cycle([173., 178., 181., 183., 182., 181., 180., 181.])),
            Color::Violet
        );
        assert_eq!(
            color_code(&cycle([181., 182., 183., 182., 181., 182., 183., 182.])),
            Color::None
        );
        assert_eq!(color_code(&cycle([179.0; 8])), Color::Blue);
        assert_eq!(
            color_code(&cycle([183., 189., 183., 183., 183., 183., 183., 183.])),
            Color::Red
        );
    }

    #[test]
    fn orange_band_endpoints() {
        assert_eq!(color_code(&cycle([188.0; 8])), Color::Orange);
        assert_eq!(color_code(&cycle([184.0; 8])), Color::None);
    }

    #[test]
    fn violet_beats_red() {
        let c = cycle([173., 190., 181., 183., 182., 181., 180., 181.]);
        assert_eq!(color_code(&c), Color::Violet);
        let red_first = ColorPrecedence(vec![ColorRule::Red, ColorRule::Violet]);
        assert_eq!(red_first.color_of(&c.readings), Color::Red);
    }

    #[test]
    fn flag_examples() {
        let f = extreme_flags(&cycle([196., 180., 173., 180., 180., 180., 180., 180.]));
        assert_eq!(
            f,
            ExtremeFlags {
                max: true,
                min: true,
                range: true
            }
        );
        let f = extreme_flags(&cycle([186., 181., 182., 183., 184., 185., 183., 182.]));
        assert_eq!(f, ExtremeFlags::default());
        let f = extreme_flags(&cycle([195., 182., 190., 190., 190., 190., 190., 190.]));
        assert_eq!(
            f,
            ExtremeFlags {
                max: true,
                min: false,
                range: true
            }
        );
    }

    #[test]
    fn annotate_examples() {
        let a = Annotator::default();
        let flat = a.annotate(&cycle([180.0; 8]));
        assert_eq!(flat, Annotation::default());

        let step = cycle([180., 180., 180., 180., 190., 190., 190., 190.]);
        let seg = binary_segmentation(&step.readings, 10.0, 2, 3);
        let ann = annotate(&step, &seg);
        assert_eq!(ann.cp_count, 1);
        assert!(!ann.flag_max && !ann.flag_min && !ann.flag_range);

        let spiky = cycle([182., 182., 196., 196., 182., 182., 190., 190.]);
        let seg = Segmentation {
            changepoints: vec![2, 4, 6],
            total_cost: 0.0,
        };
        let ann = annotate(&spiky, &seg);
        assert_eq!(ann.cp_count, 3);
        assert!(ann.flag_max && ann.flag_range && !ann.flag_min);
    }

    #[test]
    fn serializes_with_short_flag_names() {
        let json = serde_json::to_value(Annotation {
            color: Color::Orange,
            flag_max: true,
            ..Default::default()
        })
        .unwrap();
        assert_eq!(json["color"], "orange");
        assert_eq!(json["flag_M"], true);
        assert_eq!(json["flag_m"], false);
    }
}
