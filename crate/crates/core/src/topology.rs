//! Street-canyon city topology: intersections, segments, relay clusters, and
//! enumeration of the minimum-length propagation paths the mmWave signal can
//! take between network nodes.
//!
//! Distances are along-street (Manhattan-style over the graph metric); every
//! path a signal takes is a sequence of consecutive, non-repeating segments
//! whose aggregate length equals the minimum such distance.

use std::collections::{BTreeSet, BinaryHeap, HashMap};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub type IntersectionId = u32;
pub type SegmentId = u32;
pub type ClusterId = u32;

/// Geometric tolerance for snapping offsets to segment endpoints and for
/// path-length equality (meters).
const TOL: f64 = 1e-9;

/// A road intersection.
#[derive(Debug, Clone)]
pub struct Intersection<T> {
    pub id: IntersectionId,
    pub x: T,
    pub y: T,
}

/// A straight street segment between two intersections. The length is always
/// the Euclidean distance between the endpoint coordinates.
#[derive(Debug, Clone)]
pub struct Segment<T> {
    pub id: SegmentId,
    pub a: IntersectionId,
    pub b: IntersectionId,
    pub length: T,
}

/// A point on the street network: a segment plus the offset in meters from
/// the segment's `a` endpoint.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeLocation<T> {
    pub segment: SegmentId,
    pub offset: T,
}

/// Validated street network.
#[derive(Debug, Clone)]
pub struct StreetGraph<T> {
    intersections: Vec<Intersection<T>>,
    segments: Vec<Segment<T>>,
    node_index: HashMap<IntersectionId, usize>,
    segment_index: HashMap<SegmentId, usize>,
    /// adjacency[node idx] = (segment idx, neighbor node idx)
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl<T: Scalar> StreetGraph<T> {
    /// Build and validate a street graph from raw intersections and segment
    /// endpoint pairs. Segment lengths are computed from the coordinates.
    pub fn build(
        intersections: Vec<Intersection<T>>,
        segment_defs: Vec<(SegmentId, IntersectionId, IntersectionId)>,
    ) -> Result<Self> {
        let mut node_index = HashMap::new();
        for (i, n) in intersections.iter().enumerate() {
            if node_index.insert(n.id, i).is_some() {
                return Err(Error::Validation(format!("duplicate intersection id {}", n.id)));
            }
        }
        for (i, n) in intersections.iter().enumerate() {
            for m in &intersections[i + 1..] {
                if (n.x - m.x).abs() < T::of(TOL) && (n.y - m.y).abs() < T::of(TOL) {
                    return Err(Error::Validation(format!(
                        "intersections {} and {} share coordinates",
                        n.id, m.id
                    )));
                }
            }
        }
        let mut segment_index = HashMap::new();
        let mut segments = Vec::with_capacity(segment_defs.len());
        let mut seen_pairs = BTreeSet::new();
        for (idx, (id, a, b)) in segment_defs.into_iter().enumerate() {
            if a == b {
                return Err(Error::Validation(format!("segment {id} is a self-loop")));
            }
            let ia = *node_index
                .get(&a)
                .ok_or_else(|| Error::Validation(format!("segment {id} references unknown intersection {a}")))?;
            let ib = *node_index
                .get(&b)
                .ok_or_else(|| Error::Validation(format!("segment {id} references unknown intersection {b}")))?;
            if !seen_pairs.insert((a.min(b), a.max(b))) {
                return Err(Error::Validation(format!(
                    "more than one segment between intersections {a} and {b}"
                )));
            }
            if segment_index.insert(id, idx).is_some() {
                return Err(Error::Validation(format!("duplicate segment id {id}")));
            }
            let dx = intersections[ia].x - intersections[ib].x;
            let dy = intersections[ia].y - intersections[ib].y;
            let length = (dx * dx + dy * dy).sqrt();
            if length <= T::of(TOL) {
                return Err(Error::Validation(format!("segment {id} has zero length")));
            }
            segments.push(Segment { id, a, b, length });
        }
        let mut adjacency = vec![Vec::new(); intersections.len()];
        for (si, s) in segments.iter().enumerate() {
            let ia = node_index[&s.a];
            let ib = node_index[&s.b];
            adjacency[ia].push((si, ib));
            adjacency[ib].push((si, ia));
        }
        // Deterministic neighbor order.
        for nbrs in &mut adjacency {
            nbrs.sort_by_key(|(si, _)| segments[*si].id);
        }
        let graph = StreetGraph { intersections, segments, node_index, segment_index, adjacency };
        if !graph.is_connected() {
            return Err(Error::Validation("street graph is disconnected".into()));
        }
        Ok(graph)
    }

    pub fn intersections(&self) -> &[Intersection<T>] {
        &self.intersections
    }

    pub fn segments(&self) -> &[Segment<T>] {
        &self.segments
    }

    pub fn segment(&self, id: SegmentId) -> Result<&Segment<T>> {
        self.segment_index
            .get(&id)
            .map(|&i| &self.segments[i])
            .ok_or_else(|| Error::Validation(format!("unknown segment id {id}")))
    }

    fn is_connected(&self) -> bool {
        if self.intersections.is_empty() {
            return false;
        }
        let mut seen = vec![false; self.intersections.len()];
        let mut stack = vec![0usize];
        seen[0] = true;
        while let Some(u) = stack.pop() {
            for &(_, v) in &self.adjacency[u] {
                if !seen[v] {
                    seen[v] = true;
                    stack.push(v);
                }
            }
        }
        seen.into_iter().all(|s| s)
    }

    /// Resolve a location to either a node index (when the offset is within
    /// tolerance of an endpoint) or the pair of (node idx, entry cost).
    fn resolve(&self, loc: &NodeLocation<T>) -> Result<Resolved<T>> {
        let seg = self.segment(loc.segment)?;
        let len = seg.length;
        if loc.offset < -T::of(TOL) || loc.offset > len + T::of(TOL) {
            return Err(Error::Validation(format!(
                "offset {} outside segment {} of length {}",
                loc.offset, loc.segment, len
            )));
        }
        let ia = self.node_index[&seg.a];
        let ib = self.node_index[&seg.b];
        if loc.offset.abs() <= T::of(TOL) {
            Ok(Resolved::AtNode(ia))
        } else if (len - loc.offset).abs() <= T::of(TOL) {
            Ok(Resolved::AtNode(ib))
        } else {
            Ok(Resolved::Interior {
                segment_idx: self.segment_index[&loc.segment],
                ends: [(ia, loc.offset), (ib, len - loc.offset)],
            })
        }
    }

    /// Shortest along-street distances from a location to every intersection.
    pub fn distances_from(&self, loc: &NodeLocation<T>) -> Result<Vec<T>> {
        let seeds: Vec<(usize, T)> = match self.resolve(loc)? {
            Resolved::AtNode(n) => vec![(n, T::zero())],
            Resolved::Interior { ends, .. } => ends.to_vec(),
        };
        Ok(self.dijkstra(&seeds))
    }

    fn dijkstra(&self, seeds: &[(usize, T)]) -> Vec<T> {
        let mut dist = vec![T::infinity(); self.intersections.len()];
        let mut heap = BinaryHeap::new();
        for &(n, d) in seeds {
            if d < dist[n] {
                dist[n] = d;
                heap.push(HeapEntry { cost: d, node: n });
            }
        }
        while let Some(HeapEntry { cost, node }) = heap.pop() {
            if cost > dist[node] {
                continue;
            }
            for &(si, v) in &self.adjacency[node] {
                let nd = cost + self.segments[si].length;
                if nd < dist[v] {
                    dist[v] = nd;
                    heap.push(HeapEntry { cost: nd, node: v });
                }
            }
        }
        dist
    }

    /// Minimum along-street distance between two locations.
    pub fn l1_distance(&self, a: &NodeLocation<T>, b: &NodeLocation<T>) -> Result<T> {
        let dist = self.distances_from(a)?;
        let mut best = T::infinity();
        match self.resolve(b)? {
            Resolved::AtNode(n) => best = dist[n],
            Resolved::Interior { ends, .. } => {
                for (n, c) in ends {
                    best = best.min(dist[n] + c);
                }
            }
        }
        if a.segment == b.segment {
            best = best.min((a.offset - b.offset).abs());
        }
        if !best.is_finite() {
            return Err(Error::Validation("locations are not connected".into()));
        }
        Ok(best)
    }
}

enum Resolved<T> {
    AtNode(usize),
    Interior { segment_idx: usize, ends: [(usize, T); 2] },
}

struct HeapEntry<T> {
    cost: T,
    node: usize,
}

impl<T: Scalar> PartialEq for HeapEntry<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cost == other.cost && self.node == other.node
    }
}
impl<T: Scalar> Eq for HeapEntry<T> {}
impl<T: Scalar> Ord for HeapEntry<T> {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        // Min-heap on cost; ties broken by node index for determinism.
        other
            .cost
            .partial_cmp(&self.cost)
            .expect("non-finite cost in heap")
            .then_with(|| other.node.cmp(&self.node))
    }
}
impl<T: Scalar> PartialOrd for HeapEntry<T> {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

/// One signal propagation path. The first segment (the one containing the
/// transmitting endpoint) is the LoS portion; the remaining fully traversed
/// segments are NLoS. When the path ends inside a segment, that segment and
/// the distance traversed into it are recorded in `terminal` and excluded
/// from the NLoS set.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagationPath<T> {
    /// Ordered traversed segments, including the terminal one if partial.
    pub segments: Vec<SegmentId>,
    /// LoS segment (contains the transmitting endpoint).
    pub los: SegmentId,
    /// Fully traversed non-LoS segments.
    pub nlos: Vec<SegmentId>,
    /// Partially traversed final segment and the distance into it.
    pub terminal: Option<(SegmentId, T)>,
    /// Intersections strictly between the two endpoints.
    pub n_intersections: u32,
    /// Aggregate along-street length.
    pub length: T,
    /// Full length of the LoS segment.
    pub d_los: T,
}

impl<T: Scalar> PropagationPath<T> {
    /// LoS/NLoS split of the path. The terminal (cluster) segment is never
    /// part of the NLoS set.
    pub fn split_los_nlos(&self) -> (SegmentId, &[SegmentId]) {
        (self.los, &self.nlos)
    }
}

/// Enumerate every simple along-street route from `a` to `b` whose length
/// equals the minimum distance, in lexicographic segment-id order.
pub fn enumerate_paths<T: Scalar>(
    graph: &StreetGraph<T>,
    a: &NodeLocation<T>,
    b: &NodeLocation<T>,
) -> Result<Vec<PropagationPath<T>>> {
    let same_point = a.segment == b.segment && (a.offset - b.offset).abs() <= T::of(TOL);
    if same_point {
        return Err(Error::Validation("path endpoints coincide".into()));
    }
    let target = graph.l1_distance(a, b)?;
    let dist_to_b = dist_to_location(graph, b)?;
    let tol = T::of(TOL) * (T::one() + target);

    let mut paths = Vec::new();

    // Direct in-segment route when both endpoints live on the same segment.
    if a.segment == b.segment {
        let seg = graph.segment(a.segment)?;
        let direct = (a.offset - b.offset).abs();
        if (direct - target).abs() <= tol {
            paths.push(PropagationPath {
                segments: vec![seg.id],
                los: seg.id,
                nlos: Vec::new(),
                terminal: None,
                n_intersections: 0,
                length: direct,
                d_los: seg.length,
            });
        }
    }

    let b_resolved = graph.resolve(b)?;
    let mut walker = Walker {
        graph,
        target,
        tol,
        b: &b_resolved,
        b_offset: b.offset,
        dist_to_b: &dist_to_b,
        paths: &mut paths,
    };

    match graph.resolve(a)? {
        Resolved::AtNode(n) => {
            let mut seq = Vec::new();
            let mut used = BTreeSet::new();
            walker.descend(n, T::zero(), &mut seq, &mut used);
        }
        Resolved::Interior { segment_idx, ends } => {
            for (node, cost) in ends {
                let seg_id = graph.segments[segment_idx].id;
                let mut seq = vec![seg_id];
                let mut used = BTreeSet::from([seg_id]);
                walker.descend(node, cost, &mut seq, &mut used);
            }
        }
    }

    paths.sort_by(|p, q| p.segments.cmp(&q.segments));
    paths.dedup_by(|p, q| p.segments == q.segments);
    Ok(paths)
}

/// Shortest distance from every intersection to a location (for DFS pruning).
fn dist_to_location<T: Scalar>(graph: &StreetGraph<T>, loc: &NodeLocation<T>) -> Result<Vec<T>> {
    graph.distances_from(loc)
}

struct Walker<'a, T: Scalar> {
    graph: &'a StreetGraph<T>,
    target: T,
    tol: T,
    b: &'a Resolved<T>,
    b_offset: T,
    /// Shortest distance from every intersection to the endpoint `b`.
    dist_to_b: &'a [T],
    paths: &'a mut Vec<PropagationPath<T>>,
}

impl<T: Scalar> Walker<'_, T> {
    fn descend(&mut self, node: usize, len: T, seq: &mut Vec<SegmentId>, used: &mut BTreeSet<SegmentId>) {
        match self.b {
            Resolved::AtNode(nb) => {
                if node == *nb && (len - self.target).abs() <= self.tol && !seq.is_empty() {
                    self.emit(seq, None, len);
                }
            }
            Resolved::Interior { segment_idx, ends } => {
                let seg = &self.graph.segments[*segment_idx];
                if !used.contains(&seg.id) {
                    for &(end_node, _) in ends.iter() {
                        if end_node == node {
                            let entry_dist = if self.graph.node_index[&seg.a] == node {
                                self.b_offset
                            } else {
                                seg.length - self.b_offset
                            };
                            let total = len + entry_dist;
                            if (total - self.target).abs() <= self.tol {
                                self.emit(seq, Some((seg.id, entry_dist)), total);
                            }
                        }
                    }
                }
            }
        }
        // Lower-bound prune: cheapest possible completion from this node.
        for &(si, v) in &self.graph.adjacency[node] {
            let seg = &self.graph.segments[si];
            if used.contains(&seg.id) {
                continue;
            }
            let next_len = len + seg.length;
            if next_len + self.dist_to_b[v] > self.target + self.tol {
                continue;
            }
            seq.push(seg.id);
            used.insert(seg.id);
            self.descend(v, next_len, seq, used);
            used.remove(&seg.id);
            seq.pop();
        }
    }

    fn emit(&mut self, seq: &[SegmentId], terminal: Option<(SegmentId, T)>, length: T) {
        let (segments, los, nlos, n) = match (seq.is_empty(), &terminal) {
            (true, Some((t, _))) => (vec![*t], *t, Vec::new(), 0),
            (false, Some((t, _))) => {
                let mut segments = seq.to_vec();
                segments.push(*t);
                (segments, seq[0], seq[1..].to_vec(), seq.len() as u32)
            }
            (false, None) => (seq.to_vec(), seq[0], seq[1..].to_vec(), seq.len() as u32 - 1),
            (true, None) => return,
        };
        let d_los = self.graph.segment(los).expect("known segment").length;
        self.paths.push(PropagationPath {
            segments,
            los,
            nlos,
            terminal,
            n_intersections: n,
            length,
            d_los,
        });
    }
}

/// Evenly spaced candidate relay positions: offsets `(i - 0.5) * len / delta`
/// for `i = 1..=delta`, symmetric about the midpoint and strictly interior.
pub fn relay_positions<T: Scalar>(segment_length: T, delta: usize) -> Result<Vec<T>> {
    if delta == 0 {
        return Err(Error::Validation("cluster must have at least one relay position".into()));
    }
    let d = T::of(delta as f64);
    Ok((1..=delta)
        .map(|i| (T::of(i as f64) - T::of(0.5)) * segment_length / d)
        .collect())
}

/// A relay cluster placed on a street segment with `delta` discrete
/// candidate positions.
#[derive(Debug, Clone)]
pub struct ClusterPlacement<T> {
    pub id: ClusterId,
    pub segment: SegmentId,
    pub delta: usize,
    pub positions: Vec<NodeLocation<T>>,
    /// Distance between the two extreme candidate positions.
    pub d_max: T,
    /// Full length of the cluster segment.
    pub d_full: T,
}

impl<T: Scalar> ClusterPlacement<T> {
    pub fn new(id: ClusterId, segment: &Segment<T>, delta: usize) -> Result<Self> {
        let offsets = relay_positions(segment.length, delta)?;
        let d_max = *offsets.last().unwrap() - offsets[0];
        Ok(ClusterPlacement {
            id,
            segment: segment.id,
            delta,
            positions: offsets
                .into_iter()
                .map(|offset| NodeLocation { segment: segment.id, offset })
                .collect(),
            d_max,
            d_full: segment.length,
        })
    }
}

/// Candidate-position geometry of one cluster, as needed by the channel
/// kernels and predictors: offsets plus the per-position distances to the
/// path entry intersections.
#[derive(Debug, Clone)]
pub struct ClusterGeometry<T> {
    pub offsets: Vec<T>,
    /// Distance from the incoming-side entry intersection to each position.
    pub d_in: Vec<T>,
    /// Distance from the outgoing-side entry intersection to each position.
    pub d_out: Vec<T>,
    pub d_full: T,
    pub d_max: T,
}

/// The minimum-length routes from one terminal (source or destination) to the
/// entry intersection of a cluster segment.
#[derive(Debug, Clone)]
pub struct SidePaths<T> {
    /// Entry intersection of the cluster segment on this side.
    pub entry: IntersectionId,
    /// Routes ending exactly at `entry` (terminal is `None` for all).
    pub routes: Vec<PropagationPath<T>>,
    /// Sorted unique segments traversed across all routes.
    pub union: Vec<SegmentId>,
    /// Minimum distance from the terminal to `entry`.
    pub distance: T,
}

/// Full propagation-path structure for one cluster: incoming (source->relay)
/// and outgoing (relay->destination) sides plus candidate geometry.
#[derive(Debug, Clone)]
pub struct ClusterPaths<T> {
    pub placement: ClusterPlacement<T>,
    pub incoming: SidePaths<T>,
    pub outgoing: SidePaths<T>,
    pub geometry: ClusterGeometry<T>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    Incoming,
    Outgoing,
}

impl<T: Scalar> ClusterPaths<T> {
    pub fn side(&self, side: Side) -> &SidePaths<T> {
        match side {
            Side::Incoming => &self.incoming,
            Side::Outgoing => &self.outgoing,
        }
    }

    /// Distance from the side's entry intersection to a candidate position.
    pub fn entry_distance(&self, side: Side, candidate: usize) -> T {
        match side {
            Side::Incoming => self.geometry.d_in[candidate],
            Side::Outgoing => self.geometry.d_out[candidate],
        }
    }

    /// Materialize the complete path from the terminal to a candidate
    /// position: the route plus the partial traversal of the cluster segment.
    pub fn full_path(&self, side: Side, route: usize, candidate: usize) -> PropagationPath<T> {
        let r = &self.side(side).routes[route];
        let d = self.entry_distance(side, candidate);
        let mut segments = r.segments.clone();
        segments.push(self.placement.segment);
        PropagationPath {
            segments,
            los: r.los,
            nlos: r.nlos.clone(),
            terminal: Some((self.placement.segment, d)),
            n_intersections: r.n_intersections + 1,
            length: r.length + d,
            d_los: r.d_los,
        }
    }
}

/// Propagation structure of the whole network.
#[derive(Debug, Clone)]
pub struct NetworkPaths<T> {
    pub clusters: Vec<ClusterPaths<T>>,
    /// Sorted unique cluster-free segments traversed by any cluster's paths.
    pub segment_union: Vec<SegmentId>,
    pub source: NodeLocation<T>,
    pub destination: NodeLocation<T>,
}

impl<T: Scalar> NetworkPaths<T> {
    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    /// Index of a segment id in the networkwide union list.
    pub fn union_index(&self, seg: SegmentId) -> Option<usize> {
        self.segment_union.binary_search(&seg).ok()
    }
}

/// Build the propagation paths for every cluster and validate the joint
/// structure (entry intersections distinct per cluster, no cluster segment
/// traversed by another cluster's paths).
pub fn build_network_paths<T: Scalar>(
    graph: &StreetGraph<T>,
    source: NodeLocation<T>,
    destination: NodeLocation<T>,
    clusters: &[(ClusterId, SegmentId, usize)],
) -> Result<NetworkPaths<T>> {
    graph.resolve(&source)?;
    graph.resolve(&destination)?;
    let mut seen_segments = BTreeSet::new();
    for &(cid, seg, _) in clusters {
        if seg == source.segment || seg == destination.segment {
            return Err(Error::Validation(format!(
                "cluster {cid} lies on the source or destination segment"
            )));
        }
        if !seen_segments.insert(seg) {
            return Err(Error::Validation(format!("two clusters share segment {seg}")));
        }
    }

    let from_source = graph.distances_from(&source)?;
    let from_destination = graph.distances_from(&destination)?;

    let mut built = Vec::with_capacity(clusters.len());
    for &(cid, seg_id, delta) in clusters {
        let seg = graph.segment(seg_id)?.clone();
        let placement = ClusterPlacement::new(cid, &seg, delta)?;
        let entry_in = closest_endpoint(graph, &seg, &from_source)?;
        let entry_out = closest_endpoint(graph, &seg, &from_destination)?;
        if entry_in == entry_out {
            return Err(Error::Validation(format!(
                "cluster {cid}: source and destination are both closest to intersection {entry_in}; \
                 incoming and outgoing paths must enter the cluster segment from opposite ends"
            )));
        }
        let incoming = side_paths(graph, &source, entry_in)?;
        let outgoing = side_paths(graph, &destination, entry_out)?;
        let geometry = ClusterGeometry {
            offsets: placement.positions.iter().map(|p| p.offset).collect(),
            d_in: placement
                .positions
                .iter()
                .map(|p| if seg.a == entry_in { p.offset } else { seg.length - p.offset })
                .collect(),
            d_out: placement
                .positions
                .iter()
                .map(|p| if seg.a == entry_out { p.offset } else { seg.length - p.offset })
                .collect(),
            d_full: placement.d_full,
            d_max: placement.d_max,
        };
        built.push(ClusterPaths { placement, incoming, outgoing, geometry });
    }

    // No cluster's paths may traverse another cluster's segment: the model
    // assigns every traversed cluster-free segment a single scalar shadowing
    // process, which a cluster-bearing segment cannot provide.
    let cluster_segments: BTreeSet<SegmentId> = built.iter().map(|c| c.placement.segment).collect();
    let mut union = BTreeSet::new();
    for c in &built {
        for side in [&c.incoming, &c.outgoing] {
            for seg in &side.union {
                if cluster_segments.contains(seg) {
                    return Err(Error::Validation(format!(
                        "propagation paths of cluster {} traverse segment {}, which hosts another cluster",
                        c.placement.id, seg
                    )));
                }
                union.insert(*seg);
            }
        }
    }

    Ok(NetworkPaths {
        clusters: built,
        segment_union: union.into_iter().collect(),
        source,
        destination,
    })
}

fn closest_endpoint<T: Scalar>(
    graph: &StreetGraph<T>,
    seg: &Segment<T>,
    dist: &[T],
) -> Result<IntersectionId> {
    let ia = graph.node_index[&seg.a];
    let ib = graph.node_index[&seg.b];
    let (da, db) = (dist[ia], dist[ib]);
    if !da.is_finite() || !db.is_finite() {
        return Err(Error::Validation(format!("segment {} unreachable", seg.id)));
    }
    // Ties break toward the smaller intersection id for determinism.
    Ok(if da < db || (da == db && seg.a < seg.b) { seg.a } else { seg.b })
}

fn side_paths<T: Scalar>(
    graph: &StreetGraph<T>,
    terminal: &NodeLocation<T>,
    entry: IntersectionId,
) -> Result<SidePaths<T>> {
    // Represent the entry intersection as a snapped location on any incident
    // segment; enumeration only needs the node.
    let seg = graph
        .segments
        .iter()
        .find(|s| s.a == entry || s.b == entry)
        .expect("intersection with no incident segment");
    let loc = if seg.a == entry {
        NodeLocation { segment: seg.id, offset: T::zero() }
    } else {
        NodeLocation { segment: seg.id, offset: seg.length }
    };
    let routes = enumerate_paths(graph, terminal, &loc)?;
    let distance = routes
        .first()
        .map(|r| r.length)
        .ok_or_else(|| Error::Validation(format!("no path to intersection {entry}")))?;
    let mut union = BTreeSet::new();
    for r in &routes {
        union.extend(r.segments.iter().copied());
    }
    Ok(SidePaths { entry, routes, union: union.into_iter().collect(), distance })
}
