use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Deserializer, Serialize, Serializer};

/// UCI repository subject area of a task. Synthetic bundles carry their
/// concept family in the same slot as `family-<k>`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum SubjectArea {
    Biology,
    Business,
    ClimateAndEnvironment,
    ComputerScience,
    Engineering,
    Games,
    HealthAndMedicine,
    Law,
    PhysicsAndChemistry,
    SocialSciences,
    Other,
    Family(u32),
}

const NAMED: [(SubjectArea, &str, &str); 11] = [
    (SubjectArea::Biology, "Biology", "Bio"),
    (SubjectArea::Business, "Business", "Bus"),
    (SubjectArea::ClimateAndEnvironment, "Climate and Environment", "C&E"),
    (SubjectArea::ComputerScience, "Computer Science", "CS"),
    (SubjectArea::Engineering, "Engineering", "E"),
    (SubjectArea::Games, "Games", "G"),
    (SubjectArea::HealthAndMedicine, "Health and Medicine", "H&M"),
    (SubjectArea::Law, "Law", "L"),
    (SubjectArea::PhysicsAndChemistry, "Physics and Chemistry", "P&C"),
    (SubjectArea::SocialSciences, "Social Sciences", "SS"),
    (SubjectArea::Other, "Other", "O"),
];

impl SubjectArea {
    /// The eleven repository categories, in their conventional order.
    pub fn categories() -> impl Iterator<Item = SubjectArea> {
        NAMED.iter().map(|(sa, _, _)| *sa)
    }

    pub fn abbreviation(&self) -> String {
        match self {
            SubjectArea::Family(k) => format!("F{k}"),
            named => NAMED.iter().find(|(sa, _, _)| sa == named).unwrap().2.to_string(),
        }
    }
}

impl fmt::Display for SubjectArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SubjectArea::Family(k) => write!(f, "family-{k}"),
            named => f.write_str(NAMED.iter().find(|(sa, _, _)| sa == named).unwrap().1),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct UnknownSubjectArea(pub String);

impl fmt::Display for UnknownSubjectArea {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "unknown subject area `{}`", self.0)
    }
}

impl std::error::Error for UnknownSubjectArea {}

impl FromStr for SubjectArea {
    type Err = UnknownSubjectArea;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim();
        if let Some(k) = trimmed.strip_prefix("family-") {
            return k
                .parse()
                .map(SubjectArea::Family)
                .map_err(|_| UnknownSubjectArea(s.to_string()));
        }
        NAMED
            .iter()
            .find(|(_, name, abbr)| name.eq_ignore_ascii_case(trimmed) || *abbr == trimmed)
            .map(|(sa, _, _)| *sa)
            .ok_or_else(|| UnknownSubjectArea(s.to_string()))
    }
}

impl Serialize for SubjectArea {
    fn serialize<S: Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        serializer.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for SubjectArea {
    fn deserialize<D: Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let s = String::deserialize(deserializer)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}
