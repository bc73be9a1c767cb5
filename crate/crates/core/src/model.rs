//! Problem data model: locations, retrofit strategies, recovery plans, cost
//! and dislocation tensors, budget, and tornado parameters. Monetary values
//! are held as integer cents so budget arithmetic is exact.

use serde::de::Error as _;
use serde::{Deserialize, Deserializer, Serialize, Serializer};
use thiserror::Error;

use crate::geometry::{
    segment_cover_feasible, CoverOutcome, PathLength, Point2D, Rect, SegmentPath, GEOM_TOL,
};

pub const SCHEMA_VERSION: u32 = 1;

/// Money in integer cents (USD).
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default, Serialize, Deserialize,
)]
#[serde(transparent)]
pub struct Money(pub i64);

impl Money {
    pub const ZERO: Money = Money(0);

    pub fn from_dollars(d: f64) -> Self {
        Money((d * 100.0).round() as i64)
    }

    pub fn as_dollars(&self) -> f64 {
        self.0 as f64 / 100.0
    }
}

impl std::ops::Add for Money {
    type Output = Money;
    fn add(self, rhs: Money) -> Money {
        Money(self.0 + rhs.0)
    }
}

impl std::ops::Sub for Money {
    type Output = Money;
    fn sub(self, rhs: Money) -> Money {
        Money(self.0 - rhs.0)
    }
}

impl std::iter::Sum for Money {
    fn sum<I: Iterator<Item = Money>>(iter: I) -> Money {
        Money(iter.map(|m| m.0).sum())
    }
}

impl std::fmt::Display for Money {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "${}.{:02}", self.0 / 100, (self.0 % 100).abs())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Location {
    pub id: String,
    pub x: f64,
    pub y: f64,
    /// Resident population (persons).
    pub population: f64,
    /// Total built area (square meters).
    pub area_m2: f64,
}

impl Location {
    pub fn point(&self) -> Point2D {
        Point2D::new(self.x, self.y)
    }
}

/// Immutable problem data. Strategy index 0 and plan index 0 are the
/// do-nothing options; their costs are zero by invariant, which guarantees a
/// feasible plan exists for any budget.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Instance {
    pub schema_version: u32,
    pub locations: Vec<Location>,
    pub n_strategies: usize,
    pub n_plans: usize,
    /// Pre-tornado dislocation (persons), indexed `[location][strategy]`.
    pub w: Vec<Vec<f64>>,
    /// Retrofit cost in cents, indexed `[location][strategy]`.
    pub d_cents: Vec<Vec<Money>>,
    /// Post-tornado dislocation (persons), `[location][strategy][plan]`.
    pub g: Vec<Vec<Vec<f64>>>,
    /// Recovery cost in cents, `[location][strategy][plan]`.
    pub c_cents: Vec<Vec<Vec<Money>>>,
    /// Total budget in cents.
    pub budget_cents: Money,
    /// Tornado half-width (miles).
    pub delta: f64,
    /// Maximum tornado path length (miles), or unbounded.
    #[serde(with = "path_length_serde")]
    pub length: PathLength,
    /// Bounding rectangle for tornado endpoints.
    pub rect: Rect,
}

mod path_length_serde {
    use super::*;

    pub fn serialize<S: Serializer>(v: &PathLength, s: S) -> Result<S::Ok, S::Error> {
        match v {
            PathLength::Finite(e) => s.serialize_f64(*e),
            PathLength::Infinite => s.serialize_str("inf"),
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<PathLength, D::Error> {
        #[derive(Deserialize)]
        #[serde(untagged)]
        enum Raw {
            Num(f64),
            Str(String),
        }
        match Raw::deserialize(d)? {
            Raw::Num(e) if e.is_finite() && e >= 0.0 => Ok(PathLength::Finite(e)),
            Raw::Num(e) => Err(D::Error::custom(format!("invalid path length {e}"))),
            Raw::Str(s) if s == "inf" => Ok(PathLength::Infinite),
            Raw::Str(s) => Err(D::Error::custom(format!("invalid path length {s:?}"))),
        }
    }
}

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("instance is invalid: {0:?}")]
    Invalid(Vec<String>),
    #[error("retrofit plan costs {cost} but the budget is {budget}")]
    OverBudget { cost: Money, budget: Money },
    #[error("plan has {got} entries for {want} locations")]
    PlanLength { got: usize, want: usize },
    #[error("strategy index {0} out of range")]
    StrategyRange(usize),
    #[error("coverage vector is not realizable by any admissible segment")]
    UnrealizableCoverage,
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv line {line}: {message}")]
    Csv { line: usize, message: String },
}

impl Instance {
    pub fn n_locations(&self) -> usize {
        self.locations.len()
    }

    pub fn points(&self) -> Vec<Point2D> {
        self.locations.iter().map(Location::point).collect()
    }

    /// Checks every structural invariant, returning a human-readable finding
    /// per violation. An empty list means the instance is well formed.
    pub fn validate(&self) -> Vec<String> {
        let mut v = Vec::new();
        let nl = self.locations.len();
        if nl == 0 {
            v.push("instance has no locations".into());
        }
        if self.n_strategies == 0 {
            v.push("at least one (do-nothing) strategy is required".into());
        }
        if self.n_plans == 0 {
            v.push("at least one (do-nothing) recovery plan is required".into());
        }
        if !(self.delta > 0.0) {
            v.push(format!("delta must be positive, got {}", self.delta));
        }
        if let PathLength::Finite(e) = self.length {
            if !(e >= 0.0) {
                v.push(format!("length must be nonnegative, got {e}"));
            }
        }
        if self.budget_cents < Money::ZERO {
            v.push("budget must be nonnegative".into());
        }
        if self.rect.x_min > self.rect.x_max || self.rect.y_min > self.rect.y_max {
            v.push("rectangle has empty extent".into());
        }

        let dims_ok = |name: &str, outer: usize, v: &mut Vec<String>| {
            if outer != nl {
                v.push(format!("{name} has {outer} rows for {nl} locations"));
                false
            } else {
                true
            }
        };
        let w_ok = dims_ok("w", self.w.len(), &mut v);
        let d_ok = dims_ok("d_cents", self.d_cents.len(), &mut v);
        let g_ok = dims_ok("g", self.g.len(), &mut v);
        let c_ok = dims_ok("c_cents", self.c_cents.len(), &mut v);

        for (l, loc) in self.locations.iter().enumerate() {
            if !loc.point().is_finite() {
                v.push(format!("location {l} has non-finite coordinates"));
                continue;
            }
            if !self.rect.contains(&loc.point(), GEOM_TOL) {
                v.push(format!("location {l} lies outside the rectangle"));
            }
            if loc.population < 0.0 {
                v.push(format!("location {l} has negative population"));
            }
            if loc.area_m2 < 0.0 {
                v.push(format!("location {l} has negative area"));
            }
            if w_ok {
                if self.w[l].len() != self.n_strategies {
                    v.push(format!("w[{l}] has wrong strategy count"));
                } else if self.w[l].iter().any(|&x| x < 0.0 || !x.is_finite()) {
                    v.push(format!("w[{l}] has a negative or non-finite entry"));
                }
            }
            if d_ok {
                if self.d_cents[l].len() != self.n_strategies {
                    v.push(format!("d_cents[{l}] has wrong strategy count"));
                } else {
                    if self.d_cents[l][0] != Money::ZERO {
                        v.push(format!("do-nothing retrofit cost must be 0 at location {l}"));
                    }
                    if self.d_cents[l].iter().any(|&m| m < Money::ZERO) {
                        v.push(format!("d_cents[{l}] has a negative entry"));
                    }
                }
            }
            for s in 0..self.n_strategies {
                if g_ok {
                    match self.g.get(l).map(|row| row.get(s)) {
                        Some(Some(gs)) if gs.len() == self.n_plans => {
                            for (p, &val) in gs.iter().enumerate() {
                                if val < 0.0 || !val.is_finite() {
                                    v.push(format!("g[{l}][{s}][{p}] is negative or non-finite"));
                                } else if val > loc.population + 1e-9 {
                                    v.push(format!(
                                        "dislocation exceeds population at ({l},{s},{p})"
                                    ));
                                }
                            }
                        }
                        _ => v.push(format!("g[{l}][{s}] has wrong plan count")),
                    }
                }
                if c_ok {
                    match self.c_cents.get(l).map(|row| row.get(s)) {
                        Some(Some(cs)) if cs.len() == self.n_plans => {
                            if cs[0] != Money::ZERO {
                                v.push(format!(
                                    "do-nothing recovery cost must be 0 at ({l},{s})"
                                ));
                            }
                            if cs.iter().any(|&m| m < Money::ZERO) {
                                v.push(format!("c_cents[{l}][{s}] has a negative entry"));
                            }
                        }
                        _ => v.push(format!("c_cents[{l}][{s}] has wrong plan count")),
                    }
                }
            }
        }
        v
    }

    pub fn validated(self) -> Result<Instance, ModelError> {
        let findings = self.validate();
        if findings.is_empty() {
            Ok(self)
        } else {
            Err(ModelError::Invalid(findings))
        }
    }

    pub fn from_json(text: &str) -> Result<Instance, ModelError> {
        let inst: Instance = serde_json::from_str(text)?;
        inst.validated()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("instance serializes")
    }

    pub fn load(path: &std::path::Path) -> Result<Instance, ModelError> {
        Instance::from_json(&std::fs::read_to_string(path)?)
    }
}

/// Per-location big-M: the farthest rectangle corner. Any point inside the
/// rectangle is within M of every location, so distance constraints relax
/// correctly when a coverage indicator is off.
#[derive(Debug, Clone, PartialEq)]
pub struct BigM {
    pub m: Vec<f64>,
}

pub fn big_m(instance: &Instance) -> BigM {
    let corners = instance.rect.corners();
    let m = instance
        .locations
        .iter()
        .map(|loc| {
            corners
                .iter()
                .map(|c| loc.point().dist(c))
                .fold(0.0f64, f64::max)
        })
        .collect();
    BigM { m }
}

/// First-stage decision: one retrofit strategy per location. Construction
/// enforces the budget, so a plan in hand is always affordable.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetrofitPlan {
    s_of: Vec<usize>,
}

impl RetrofitPlan {
    pub fn new(s_of: Vec<usize>, instance: &Instance) -> Result<RetrofitPlan, ModelError> {
        if s_of.len() != instance.n_locations() {
            return Err(ModelError::PlanLength {
                got: s_of.len(),
                want: instance.n_locations(),
            });
        }
        if let Some(&s) = s_of.iter().find(|&&s| s >= instance.n_strategies) {
            return Err(ModelError::StrategyRange(s));
        }
        let plan = RetrofitPlan { s_of };
        let cost = plan.retrofit_cost(instance);
        if cost > instance.budget_cents {
            return Err(ModelError::OverBudget { cost, budget: instance.budget_cents });
        }
        Ok(plan)
    }

    pub fn do_nothing(instance: &Instance) -> RetrofitPlan {
        RetrofitPlan { s_of: vec![0; instance.n_locations()] }
    }

    pub fn strategy(&self, l: usize) -> usize {
        self.s_of[l]
    }

    pub fn strategies(&self) -> &[usize] {
        &self.s_of
    }

    pub fn retrofit_cost(&self, instance: &Instance) -> Money {
        self.s_of
            .iter()
            .enumerate()
            .map(|(l, &s)| instance.d_cents[l][s])
            .sum()
    }

    pub fn first_stage_dislocation(&self, instance: &Instance) -> f64 {
        self.s_of
            .iter()
            .enumerate()
            .map(|(l, &s)| instance.w[l][s])
            .sum()
    }

    pub fn residual_budget(&self, instance: &Instance) -> Money {
        instance.budget_cents - self.retrofit_cost(instance)
    }
}

/// A realizable tornado coverage vector, carrying a witness segment when the
/// coverage is nonempty.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TornadoScenario {
    pub z: Vec<bool>,
    pub witness: Option<SegmentPath>,
}

impl TornadoScenario {
    /// Empty coverage: realizable by any point path, needs no witness.
    pub fn none(instance: &Instance) -> TornadoScenario {
        TornadoScenario { z: vec![false; instance.n_locations()], witness: None }
    }

    /// Builds a scenario after certifying the active set is coverable by an
    /// admissible segment. An inconclusive geometry verdict is rejected.
    pub fn new(z: Vec<bool>, instance: &Instance) -> Result<TornadoScenario, ModelError> {
        assert_eq!(z.len(), instance.n_locations());
        let active: Vec<Point2D> = z
            .iter()
            .zip(&instance.locations)
            .filter(|(&on, _)| on)
            .map(|(_, loc)| loc.point())
            .collect();
        if active.is_empty() {
            return Ok(TornadoScenario { z, witness: None });
        }
        match segment_cover_feasible(&active, instance.delta, instance.length, &instance.rect) {
            CoverOutcome::Feasible(seg) => Ok(TornadoScenario { z, witness: Some(seg) }),
            _ => Err(ModelError::UnrealizableCoverage),
        }
    }

    /// Coverage induced by an explicit segment: every location within delta.
    pub fn from_segment(seg: SegmentPath, instance: &Instance) -> TornadoScenario {
        let z = instance
            .locations
            .iter()
            .map(|loc| {
                crate::geometry::point_segment_distance(&loc.point(), &seg).0
                    <= instance.delta + GEOM_TOL
            })
            .collect();
        TornadoScenario { z, witness: Some(seg) }
    }

    pub fn active_indices(&self) -> Vec<usize> {
        self.z
            .iter()
            .enumerate()
            .filter(|(_, &on)| on)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn hit_count(&self) -> usize {
        self.z.iter().filter(|&&on| on).count()
    }
}

/// Converts latitude/longitude (degrees) to planar miles with a local
/// equirectangular projection anchored at the point-set centroid.
pub fn latlon_to_miles(coords: &[(f64, f64)]) -> Vec<Point2D> {
    const MILES_PER_DEG_LAT: f64 = 69.0;
    if coords.is_empty() {
        return Vec::new();
    }
    let lat0 = coords.iter().map(|c| c.0).sum::<f64>() / coords.len() as f64;
    let lon0 = coords.iter().map(|c| c.1).sum::<f64>() / coords.len() as f64;
    let cos0 = lat0.to_radians().cos();
    coords
        .iter()
        .map(|&(lat, lon)| {
            Point2D::new(
                (lon - lon0) * MILES_PER_DEG_LAT * cos0,
                (lat - lat0) * MILES_PER_DEG_LAT,
            )
        })
        .collect()
}

/// Parses locations from CSV with header `id,x,y,population,area`.
pub fn locations_from_csv(text: &str) -> Result<Vec<Location>, ModelError> {
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (i == 0 && line.starts_with("id")) {
            continue;
        }
        let parts: Vec<&str> = line.split(',').map(str::trim).collect();
        if parts.len() != 5 {
            return Err(ModelError::Csv {
                line: i + 1,
                message: format!("expected 5 fields, got {}", parts.len()),
            });
        }
        let parse = |s: &str, what: &str| -> Result<f64, ModelError> {
            s.parse().map_err(|_| ModelError::Csv {
                line: i + 1,
                message: format!("invalid {what}: {s:?}"),
            })
        };
        out.push(Location {
            id: parts[0].to_string(),
            x: parse(parts[1], "x")?,
            y: parse(parts[2], "y")?,
            population: parse(parts[3], "population")?,
            area_m2: parse(parts[4], "area")?,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn tiny_instance() -> Instance {
        Instance {
            schema_version: SCHEMA_VERSION,
            locations: vec![
                Location { id: "a".into(), x: 0.0, y: 0.0, population: 100.0, area_m2: 1000.0 },
                Location { id: "b".into(), x: 2.0, y: 0.0, population: 50.0, area_m2: 500.0 },
                Location { id: "c".into(), x: 1.0, y: 1.0, population: 80.0, area_m2: 800.0 },
            ],
            n_strategies: 2,
            n_plans: 2,
            w: vec![vec![0.0; 2]; 3],
            d_cents: vec![
                vec![Money::ZERO, Money(100_00)],
                vec![Money::ZERO, Money(200_00)],
                vec![Money::ZERO, Money(150_00)],
            ],
            g: vec![
                vec![vec![90.0, 40.0], vec![60.0, 20.0]],
                vec![vec![45.0, 20.0], vec![30.0, 10.0]],
                vec![vec![70.0, 30.0], vec![50.0, 15.0]],
            ],
            c_cents: vec![
                vec![vec![Money::ZERO, Money(50_00)], vec![Money::ZERO, Money(40_00)]],
                vec![vec![Money::ZERO, Money(30_00)], vec![Money::ZERO, Money(25_00)]],
                vec![vec![Money::ZERO, Money(45_00)], vec![Money::ZERO, Money(35_00)]],
            ],
            budget_cents: Money(500_00),
            delta: 1.0,
            length: PathLength::Finite(2.0),
            rect: Rect::new(-5.0, 5.0, -5.0, 5.0),
        }
    }

    #[test]
    fn valid_instance_has_no_findings() {
        assert!(tiny_instance().validate().is_empty());
    }

    #[test]
    fn validation_catches_do_nothing_cost() {
        let mut inst = tiny_instance();
        inst.d_cents[0][0] = Money(5_00);
        let findings = inst.validate();
        assert!(findings.iter().any(|f| f.contains("do-nothing retrofit cost")));
    }

    #[test]
    fn validation_catches_dislocation_above_population() {
        let mut inst = tiny_instance();
        inst.g[1][0][1] = inst.locations[1].population + 10.0;
        let findings = inst.validate();
        assert!(findings.iter().any(|f| f.contains("exceeds population at (1,0,1)")));
    }

    #[test]
    fn big_m_corner_cases() {
        let mut inst = tiny_instance();
        inst.rect = Rect::new(0.0, 4.0, 0.0, 3.0);
        let bm = big_m(&inst);
        assert!((bm.m[0] - 5.0).abs() < 1e-12);

        inst.locations = vec![Location {
            id: "mid".into(),
            x: 1.0,
            y: 1.0,
            population: 1.0,
            area_m2: 1.0,
        }];
        inst.rect = Rect::new(0.0, 2.0, 0.0, 2.0);
        let bm = big_m(&inst);
        assert!((bm.m[0] - 2f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn json_round_trip_exact() {
        let inst = tiny_instance();
        let back = Instance::from_json(&inst.to_json()).unwrap();
        assert_eq!(inst, back);

        let mut unbounded = tiny_instance();
        unbounded.length = PathLength::Infinite;
        let back = Instance::from_json(&unbounded.to_json()).unwrap();
        assert_eq!(unbounded, back);
    }

    #[test]
    fn plan_budget_enforced_at_construction() {
        let inst = tiny_instance();
        let ok = RetrofitPlan::new(vec![1, 1, 1], &inst).unwrap();
        assert_eq!(ok.retrofit_cost(&inst), Money(450_00));

        let mut tight = inst.clone();
        tight.budget_cents = Money(100_00);
        assert!(matches!(
            RetrofitPlan::new(vec![1, 1, 0], &tight),
            Err(ModelError::OverBudget { .. })
        ));
        assert!(RetrofitPlan::new(vec![1, 0, 0], &tight).is_ok());
    }

    #[test]
    fn scenario_construction_checks_realizability() {
        let inst = tiny_instance();
        let all = TornadoScenario::new(vec![true, true, true], &inst).unwrap();
        assert!(all.witness.is_some());
        let none = TornadoScenario::new(vec![false, false, false], &inst).unwrap();
        assert!(none.witness.is_none());

        // Spread the points too far for a length-2 segment.
        let mut far = inst.clone();
        far.locations[1].x = 20.0;
        far.rect = Rect::new(-30.0, 30.0, -30.0, 30.0);
        assert!(matches!(
            TornadoScenario::new(vec![true, true, false], &far),
            Err(ModelError::UnrealizableCoverage)
        ));
    }

    #[test]
    fn scenario_from_segment_uses_distance_rule() {
        let inst = tiny_instance();
        let seg = SegmentPath::new(Point2D::new(0.0, 0.0), Point2D::new(2.0, 0.0));
        let sc = TornadoScenario::from_segment(seg, &inst);
        assert_eq!(sc.z, vec![true, true, true]);

        let away = SegmentPath::point(Point2D::new(-4.0, -4.0));
        let sc = TornadoScenario::from_segment(away, &inst);
        assert_eq!(sc.hit_count(), 0);
    }

    #[test]
    fn latlon_projection_scales() {
        let pts = latlon_to_miles(&[(37.0, -94.5), (37.0, -94.4), (37.1, -94.5)]);
        // One degree of latitude is ~69 miles; 0.1 degrees ~ 6.9.
        assert!((pts[2].y - pts[0].y - 6.9).abs() < 1e-9);
        assert!(pts[1].x > pts[0].x);
        assert!((pts[1].x - pts[0].x) < 6.9); // longitude shrinks with cos(lat)
    }

    #[test]
    fn csv_parse_and_errors() {
        let locs = locations_from_csv("id,x,y,population,area\nb1,0.5,1.5,120,900\n").unwrap();
        assert_eq!(locs.len(), 1);
        assert_eq!(locs[0].id, "b1");
        assert!((locs[0].y - 1.5).abs() < 1e-12);

        let err = locations_from_csv("id,x,y,population,area\nb1,oops,1,2,3\n").unwrap_err();
        assert!(matches!(err, ModelError::Csv { line: 2, .. }));
    }
}
