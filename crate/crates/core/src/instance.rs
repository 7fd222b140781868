//! CVRPLIB instance handling: parsing, serialization, rounded Euclidean
//! distances, and ng neighborhoods.
//!
//! Nodes are indexed `0..=n+1`: node `0` is the start depot, nodes `1..=n`
//! are customers in file order, and node `n+1` is the end depot (a copy of
//! the start depot for parsed instances; [`Instance::from_parts`] may place
//! it elsewhere, which some tests use).

use thiserror::Error;

/// Euclidean distance between two points, rounded half away from zero to an
/// integer. This is the arc cost used everywhere; it need not satisfy the
/// triangle inequality exactly, but `c(u,w) <= c(u,v) + c(v,w) + 1` always
/// holds.
pub fn euclidean_rounded(a: (f64, f64), b: (f64, f64)) -> i64 {
    let dx = a.0 - b.0;
    let dy = a.1 - b.1;
    // f64::round rounds half away from zero, which is the tie rule we want.
    (dx * dx + dy * dy).sqrt().round() as i64
}

#[derive(Debug, Error)]
pub enum InstanceError {
    #[error("instance needs at least one customer")]
    NoCustomers,
    #[error("{0} customers exceed the supported maximum of 64")]
    TooManyCustomers(usize),
    #[error("capacity must be a positive integer")]
    ZeroCapacity,
    #[error("customer {customer} has demand {demand} exceeding capacity {capacity}")]
    DemandExceedsCapacity {
        customer: usize,
        demand: u32,
        capacity: u32,
    },
    #[error("customer {0} has zero demand; demands must be positive")]
    ZeroDemand(usize),
    #[error("depot demand must be zero")]
    DepotDemand,
    #[error("coordinate count {coords} does not match demand count {demands}")]
    LengthMismatch { coords: usize, demands: usize },
    #[error("fixed cost must be finite and nonnegative, got {0}")]
    BadFixedCost(f64),
    #[error("coordinates must be finite")]
    BadCoordinate,
}

#[derive(Debug, Error)]
pub enum ParseError {
    #[error("line {line}: expected {expected}, found {found:?}")]
    BadLine {
        line: usize,
        expected: &'static str,
        found: String,
    },
    #[error("line {line}: unsupported instance type {found:?} (only CVRP)")]
    UnsupportedType { line: usize, found: String },
    #[error("line {line}: unsupported edge weight type {found:?} (only EUC_2D)")]
    UnsupportedEdgeWeights { line: usize, found: String },
    #[error("line {line}: unrecognized section or statement {found:?}")]
    Unrecognized { line: usize, found: String },
    #[error("line {line}: {header} must appear before the data sections")]
    HeaderAfterData { line: usize, header: &'static str },
    #[error("missing required header {0}")]
    MissingHeader(&'static str),
    #[error("missing required section {0}")]
    MissingSection(&'static str),
    #[error("line {line}: node id {id} out of range 1..={dim}")]
    NodeIdOutOfRange { line: usize, id: i64, dim: usize },
    #[error("line {line}: node {id} listed twice")]
    DuplicateNode { line: usize, id: usize },
    #[error("node {0} missing from section")]
    IncompleteSection(usize),
    #[error("line {line}: DEPOT_SECTION must name exactly one depot")]
    BadDepot { line: usize },
    #[error("file data: {0}")]
    Invalid(#[from] InstanceError),
}

/// A CVRP instance with a start depot, customers, and an end depot, all
/// pairwise distances precomputed with [`euclidean_rounded`].
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    name: String,
    coords: Vec<(f64, f64)>,
    demand: Vec<u32>,
    capacity: u32,
    fixed_cost: f64,
    vehicle_bound: usize,
    dist: Vec<i64>,
}

impl Instance {
    /// Build an instance from explicit node data. `coords` and `demands`
    /// cover all nodes including both depots: index 0 is the start depot and
    /// the last index the end depot. Depot demands must be zero and every
    /// customer demand must fit in the capacity, so singleton routes are
    /// always feasible.
    ///
    /// Parsed instances always have coinciding depots; separating them here
    /// is allowed (some geometric tests rely on it) but such an instance
    /// serializes lossily, keeping only the start depot.
    pub fn from_parts(
        name: impl Into<String>,
        coords: Vec<(f64, f64)>,
        demands: Vec<u32>,
        capacity: u32,
        fixed_cost: f64,
    ) -> Result<Instance, InstanceError> {
        if coords.len() != demands.len() {
            return Err(InstanceError::LengthMismatch {
                coords: coords.len(),
                demands: demands.len(),
            });
        }
        if coords.len() < 3 {
            return Err(InstanceError::NoCustomers);
        }
        let n = coords.len() - 2;
        if n > 64 {
            return Err(InstanceError::TooManyCustomers(n));
        }
        if capacity == 0 {
            return Err(InstanceError::ZeroCapacity);
        }
        if !(fixed_cost.is_finite() && fixed_cost >= 0.0) {
            return Err(InstanceError::BadFixedCost(fixed_cost));
        }
        if coords.iter().any(|&(x, y)| !(x.is_finite() && y.is_finite())) {
            return Err(InstanceError::BadCoordinate);
        }
        if demands[0] != 0 || demands[n + 1] != 0 {
            return Err(InstanceError::DepotDemand);
        }
        for u in 1..=n {
            if demands[u] == 0 {
                return Err(InstanceError::ZeroDemand(u));
            }
            if demands[u] > capacity {
                return Err(InstanceError::DemandExceedsCapacity {
                    customer: u,
                    demand: demands[u],
                    capacity,
                });
            }
        }
        let name = name.into();
        let vehicle_bound = kappa_from_name(&name).unwrap_or(n);
        let side = coords.len();
        let mut dist = vec![0i64; side * side];
        for u in 0..side {
            for v in 0..side {
                dist[u * side + v] = euclidean_rounded(coords[u], coords[v]);
            }
        }
        Ok(Instance {
            name,
            coords,
            demand: demands,
            capacity,
            fixed_cost,
            vehicle_bound,
            dist,
        })
    }

    /// Convenience constructor with a single depot location shared by both
    /// route endpoints, which is the normal CVRP shape.
    pub fn single_depot(
        name: impl Into<String>,
        depot: (f64, f64),
        customers: &[((f64, f64), u32)],
        capacity: u32,
        fixed_cost: f64,
    ) -> Result<Instance, InstanceError> {
        let mut coords = Vec::with_capacity(customers.len() + 2);
        let mut demands = Vec::with_capacity(customers.len() + 2);
        coords.push(depot);
        demands.push(0);
        for &(xy, d) in customers {
            coords.push(xy);
            demands.push(d);
        }
        coords.push(depot);
        demands.push(0);
        Instance::from_parts(name, coords, demands, capacity, fixed_cost)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn n_customers(&self) -> usize {
        self.coords.len() - 2
    }

    /// Total node count including both depots.
    pub fn n_nodes(&self) -> usize {
        self.coords.len()
    }

    pub fn start_depot(&self) -> usize {
        0
    }

    pub fn end_depot(&self) -> usize {
        self.coords.len() - 1
    }

    pub fn is_customer(&self, u: usize) -> bool {
        u >= 1 && u <= self.n_customers()
    }

    /// Customer node ids, `1..=n`.
    pub fn customers(&self) -> std::ops::RangeInclusive<usize> {
        1..=self.n_customers()
    }

    pub fn coord(&self, u: usize) -> (f64, f64) {
        self.coords[u]
    }

    pub fn demand(&self, u: usize) -> u32 {
        self.demand[u]
    }

    pub fn capacity(&self) -> u32 {
        self.capacity
    }

    /// Per-route fixed cost, added to every column's cost.
    pub fn fixed_cost(&self) -> f64 {
        self.fixed_cost
    }

    pub fn set_fixed_cost(&mut self, f: f64) -> Result<(), InstanceError> {
        if !(f.is_finite() && f >= 0.0) {
            return Err(InstanceError::BadFixedCost(f));
        }
        self.fixed_cost = f;
        Ok(())
    }

    /// Vehicle count used by the Lagrangian lower bound. Parsed from a
    /// `-k<digits>` name suffix when present, otherwise the customer count.
    pub fn vehicle_bound(&self) -> usize {
        self.vehicle_bound
    }

    pub fn set_vehicle_bound(&mut self, k: usize) {
        self.vehicle_bound = k.max(1);
    }

    /// Rounded distance between two nodes.
    pub fn dist(&self, u: usize, v: usize) -> i64 {
        self.dist[u * self.coords.len() + v]
    }

    /// True when every rounded triangle inequality holds exactly, i.e.
    /// rounding never created a shortcut violation. Some derivations only
    /// hold on such instances.
    pub fn triangle_consistent(&self) -> bool {
        let n = self.n_nodes();
        for u in 0..n {
            for v in 0..n {
                for w in 0..n {
                    if self.dist(u, w) > self.dist(u, v) + self.dist(v, w) {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Serialize to CVRPLIB text. The end depot is not written (the format
    /// has a single depot); a nonzero fixed cost is recorded on the COMMENT
    /// line so parsing the output reproduces it.
    pub fn to_vrp_string(&self) -> String {
        use std::fmt::Write;
        let n = self.n_customers();
        let mut s = String::new();
        writeln!(s, "NAME : {}", self.name).unwrap();
        if self.fixed_cost != 0.0 {
            writeln!(s, "COMMENT : fixed-cost {}", self.fixed_cost).unwrap();
        }
        writeln!(s, "TYPE : CVRP").unwrap();
        writeln!(s, "DIMENSION : {}", n + 1).unwrap();
        writeln!(s, "EDGE_WEIGHT_TYPE : EUC_2D").unwrap();
        writeln!(s, "CAPACITY : {}", self.capacity).unwrap();
        writeln!(s, "NODE_COORD_SECTION").unwrap();
        for u in 0..=n {
            writeln!(s, "{} {} {}", u + 1, fmt_coord(self.coords[u].0), fmt_coord(self.coords[u].1)).unwrap();
        }
        writeln!(s, "DEMAND_SECTION").unwrap();
        for u in 0..=n {
            writeln!(s, "{} {}", u + 1, self.demand[u]).unwrap();
        }
        writeln!(s, "DEPOT_SECTION").unwrap();
        writeln!(s, "1").unwrap();
        writeln!(s, "-1").unwrap();
        writeln!(s, "EOF").unwrap();
        s
    }
}

fn fmt_coord(x: f64) -> String {
    if x.fract() == 0.0 && x.abs() < 1e15 {
        format!("{}", x as i64)
    } else {
        format!("{}", x)
    }
}

fn kappa_from_name(name: &str) -> Option<usize> {
    let (_, tail) = name.rsplit_once("-k")?;
    if tail.is_empty() || !tail.bytes().all(|b| b.is_ascii_digit()) {
        return None;
    }
    tail.parse().ok().filter(|&k| k >= 1)
}

/// Parse CVRPLIB EUC_2D text. Customers keep their file order; the depot
/// (from DEPOT_SECTION, defaulting to node 1) becomes node 0 and is copied
/// to the end-depot slot.
pub fn parse_cvrplib(text: &str) -> Result<Instance, ParseError> {
    let lines: Vec<(usize, &str)> = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .collect();

    let mut name: Option<String> = None;
    let mut dim: Option<usize> = None;
    let mut capacity: Option<u32> = None;
    let mut fixed_cost = 0.0f64;
    let mut coords: Vec<Option<(f64, f64)>> = Vec::new();
    let mut demands: Vec<Option<u32>> = Vec::new();
    let mut depot: Option<usize> = None;
    let mut seen_coords = false;
    let mut seen_demands = false;

    let mut i = 0;
    while i < lines.len() {
        let (ln, line) = lines[i];
        if line.is_empty() {
            i += 1;
            continue;
        }
        if line.eq_ignore_ascii_case("EOF") {
            break;
        }
        if let Some((key, value)) = line.split_once(':') {
            let key = key.trim().to_ascii_uppercase();
            let value = value.trim();
            match key.as_str() {
                "NAME" => name = Some(value.to_string()),
                "TYPE" => {
                    if !value.eq_ignore_ascii_case("CVRP") {
                        return Err(ParseError::UnsupportedType {
                            line: ln,
                            found: value.to_string(),
                        });
                    }
                }
                "COMMENT" => {
                    if let Some(f) = scan_fixed_cost(value) {
                        fixed_cost = f;
                    }
                }
                "DIMENSION" => {
                    if seen_coords || seen_demands {
                        return Err(ParseError::HeaderAfterData {
                            line: ln,
                            header: "DIMENSION",
                        });
                    }
                    dim = Some(parse_field(ln, value, "a positive node count")?);
                }
                "CAPACITY" => {
                    capacity = Some(parse_field(ln, value, "an integer capacity")?);
                }
                "EDGE_WEIGHT_TYPE" => {
                    if !value.eq_ignore_ascii_case("EUC_2D") {
                        return Err(ParseError::UnsupportedEdgeWeights {
                            line: ln,
                            found: value.to_string(),
                        });
                    }
                }
                // Headers like BEST_KNOWN or DISPLAY_DATA_TYPE don't affect us.
                _ => {}
            }
            i += 1;
            continue;
        }
        let section = line.to_ascii_uppercase();
        match section.as_str() {
            "NODE_COORD_SECTION" => {
                let d = dim.ok_or(ParseError::MissingHeader("DIMENSION"))?;
                coords = vec![None; d];
                seen_coords = true;
                i += 1;
                for _ in 0..d {
                    let (ln, row) = next_data_line(&lines, &mut i, "node coordinate row")?;
                    let mut it = row.split_whitespace();
                    let id = parse_node_id(ln, it.next(), d)?;
                    let x: f64 = parse_field(ln, it.next().unwrap_or(""), "an x coordinate")?;
                    let y: f64 = parse_field(ln, it.next().unwrap_or(""), "a y coordinate")?;
                    if coords[id - 1].is_some() {
                        return Err(ParseError::DuplicateNode { line: ln, id });
                    }
                    coords[id - 1] = Some((x, y));
                }
            }
            "DEMAND_SECTION" => {
                let d = dim.ok_or(ParseError::MissingHeader("DIMENSION"))?;
                demands = vec![None; d];
                seen_demands = true;
                i += 1;
                for _ in 0..d {
                    let (ln, row) = next_data_line(&lines, &mut i, "demand row")?;
                    let mut it = row.split_whitespace();
                    let id = parse_node_id(ln, it.next(), d)?;
                    let dem: u32 = parse_field(ln, it.next().unwrap_or(""), "a demand value")?;
                    if demands[id - 1].is_some() {
                        return Err(ParseError::DuplicateNode { line: ln, id });
                    }
                    demands[id - 1] = Some(dem);
                }
            }
            "DEPOT_SECTION" => {
                let d = dim.ok_or(ParseError::MissingHeader("DIMENSION"))?;
                i += 1;
                loop {
                    let (ln, row) = next_data_line(&lines, &mut i, "depot id or -1")?;
                    let v: i64 = parse_field(ln, row, "a depot id or -1")?;
                    if v == -1 {
                        break;
                    }
                    if v < 1 || v as usize > d {
                        return Err(ParseError::NodeIdOutOfRange { line: ln, id: v, dim: d });
                    }
                    if depot.is_some() {
                        return Err(ParseError::BadDepot { line: ln });
                    }
                    depot = Some(v as usize);
                }
            }
            _ => {
                return Err(ParseError::Unrecognized {
                    line: ln,
                    found: line.to_string(),
                });
            }
        }
    }

    let dim = dim.ok_or(ParseError::MissingHeader("DIMENSION"))?;
    let capacity = capacity.ok_or(ParseError::MissingHeader("CAPACITY"))?;
    if !seen_coords {
        return Err(ParseError::MissingSection("NODE_COORD_SECTION"));
    }
    if !seen_demands {
        return Err(ParseError::MissingSection("DEMAND_SECTION"));
    }
    let mut node_coords = Vec::with_capacity(dim);
    let mut node_demands = Vec::with_capacity(dim);
    for id in 1..=dim {
        node_coords.push(coords[id - 1].ok_or(ParseError::IncompleteSection(id))?);
        node_demands.push(demands[id - 1].ok_or(ParseError::IncompleteSection(id))?);
    }
    let depot = depot.unwrap_or(1);
    if node_demands[depot - 1] != 0 {
        return Err(ParseError::Invalid(InstanceError::DepotDemand));
    }

    let mut full_coords = Vec::with_capacity(dim + 1);
    let mut full_demands = Vec::with_capacity(dim + 1);
    full_coords.push(node_coords[depot - 1]);
    full_demands.push(0);
    for id in 1..=dim {
        if id != depot {
            full_coords.push(node_coords[id - 1]);
            full_demands.push(node_demands[id - 1]);
        }
    }
    full_coords.push(node_coords[depot - 1]);
    full_demands.push(0);

    let name = name.unwrap_or_else(|| "unnamed".to_string());
    Ok(Instance::from_parts(
        name,
        full_coords,
        full_demands,
        capacity,
        fixed_cost,
    )?)
}

fn next_data_line<'a>(
    lines: &[(usize, &'a str)],
    i: &mut usize,
    expected: &'static str,
) -> Result<(usize, &'a str), ParseError> {
    while *i < lines.len() {
        let (ln, line) = lines[*i];
        *i += 1;
        if !line.is_empty() {
            return Ok((ln, line));
        }
    }
    Err(ParseError::BadLine {
        line: lines.last().map_or(0, |&(ln, _)| ln),
        expected,
        found: "end of file".to_string(),
    })
}

fn parse_node_id(line: usize, tok: Option<&str>, dim: usize) -> Result<usize, ParseError> {
    let tok = tok.unwrap_or("");
    let id: i64 = parse_field(line, tok, "a node id")?;
    if id < 1 || id as usize > dim {
        return Err(ParseError::NodeIdOutOfRange { line, id, dim });
    }
    Ok(id as usize)
}

fn parse_field<T: std::str::FromStr>(
    line: usize,
    tok: &str,
    expected: &'static str,
) -> Result<T, ParseError> {
    tok.parse().map_err(|_| ParseError::BadLine {
        line,
        expected,
        found: tok.to_string(),
    })
}

fn scan_fixed_cost(comment: &str) -> Option<f64> {
    let mut it = comment.split_whitespace();
    while let Some(tok) = it.next() {
        if tok.eq_ignore_ascii_case("fixed-cost") {
            return it.next()?.parse().ok();
        }
    }
    None
}

/// ng neighborhoods: for each customer, its `ng_size` nearest other
/// customers by rounded distance, ties broken by smaller id. The effective
/// size is clamped to `n - 1`.
#[derive(Debug, Clone)]
pub struct Neighborhoods {
    ng_size: usize,
    sets: Vec<Vec<usize>>,
    masks: Vec<u64>,
}

pub fn build_neighborhoods(inst: &Instance, ng_size: usize) -> Neighborhoods {
    let n = inst.n_customers();
    let eff = ng_size.min(n.saturating_sub(1));
    let mut sets = Vec::with_capacity(n);
    let mut masks = Vec::with_capacity(n);
    for u in inst.customers() {
        let mut others: Vec<usize> = inst.customers().filter(|&v| v != u).collect();
        others.sort_by_key(|&v| (inst.dist(u, v), v));
        others.truncate(eff);
        others.sort_unstable();
        let mask = others.iter().fold(0u64, |m, &v| m | (1u64 << (v - 1)));
        sets.push(others);
        masks.push(mask);
    }
    Neighborhoods { ng_size, sets, masks }
}

impl Neighborhoods {
    /// The requested neighborhood size (before clamping).
    pub fn ng_size(&self) -> usize {
        self.ng_size
    }

    /// Neighborhood of customer `u`, sorted by id.
    pub fn set(&self, u: usize) -> &[usize] {
        &self.sets[u - 1]
    }

    /// Bitmask form of the neighborhood; customer `c` occupies bit `c - 1`.
    pub fn mask(&self, u: usize) -> u64 {
        self.masks[u - 1]
    }

    pub fn contains(&self, u: usize, v: usize) -> bool {
        self.masks[u - 1] & (1u64 << (v - 1)) != 0
    }
}
