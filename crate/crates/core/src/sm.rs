//! Sequence memory: multi-order temporal learning over column SDRs.
//!
//! Each of the `r` mini-columns holds `p` cells; each cell grows dendritic
//! segments whose synapses point at presynaptic cells. A segment fires when
//! enough of its connected, sufficiently permanent synapses land on cells
//! that are currently active; a cell with a firing segment becomes
//! predictive for the next step. Columns that activate without having been
//! predicted burst (all cells active), which is how new contexts recruit
//! fresh cells. Learning follows LTP/LTD: reinforced segments strengthen
//! synapses onto previously active cells and weaken the rest, while false
//! predictions are punished.

use crate::sdr::Sdr;
use serde::{Deserialize, Serialize};
use std::collections::{BTreeMap, BTreeSet};

/// Coordinates of one cell: `(column, cell within column)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellId {
    pub column: usize,
    pub cell: usize,
}

/// One synapse of a dendritic segment. `connected` mirrors the ON-flag
/// derived state: it always equals `permanence >= synapse_connect_threshold`
/// after any public operation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Synapse {
    pub presynaptic: CellId,
    pub permanence: f64,
    pub connected: bool,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Segment {
    pub synapses: Vec<Synapse>,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Cell {
    pub segments: Vec<Segment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmConfig {
    /// Cells per mini-column (`p`).
    pub cells_per_column: usize,
    /// Permanence level a synapse needs before it may vote.
    pub theta: f64,
    /// Permanence level at which a synapse counts as connected.
    pub synapse_connect_threshold: f64,
    /// Minimum qualifying synapses for a segment to fire.
    pub activation_threshold: usize,
    pub perm_inc: f64,
    pub perm_dec: f64,
    pub initial_perm: f64,
    pub max_segments: usize,
    pub max_synapses: usize,
}

impl Default for SmConfig {
    fn default() -> Self {
        Self {
            cells_per_column: 8,
            theta: 0.5,
            synapse_connect_threshold: 0.5,
            activation_threshold: 13,
            perm_inc: 0.1,
            perm_dec: 0.05,
            initial_perm: 0.21,
            max_segments: 32,
            max_synapses: 32,
        }
    }
}

impl SmConfig {
    pub fn validate(&self) -> Result<(), String> {
        if self.cells_per_column == 0 {
            return Err("sm.cells_per_column must be positive".into());
        }
        if !(self.theta > 0.0 && self.theta < 1.0) {
            return Err("sm.theta must be in (0,1)".into());
        }
        if self.activation_threshold == 0 {
            return Err("sm.activation_threshold must be >= 1".into());
        }
        Ok(())
    }
}

/// Per-cell prediction details: which segments fired and the best segment's
/// qualifying-synapse count (the cell's winner score).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionInfo {
    pub active_segments: Vec<usize>,
    pub best_score: usize,
}

/// All predictive cells plus the column-level prediction SDR.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Predictions {
    pub cells: BTreeMap<CellId, PredictionInfo>,
    pub columns: Vec<usize>,
}

impl Predictions {
    pub fn predicted_columns(&self, width: usize) -> Sdr {
        Sdr::from_sorted_unchecked(width, self.columns.clone())
    }
}

/// What a learning cell should update this step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LearnTarget {
    /// Reinforce the segment that correctly predicted the cell.
    Reinforce { segment: usize },
    /// Grow a new segment toward the previous winner cells.
    Grow,
}

/// Result of one [`TemporalNetwork::sm_step`].
#[derive(Debug, Clone, PartialEq)]
pub struct SmStepOutput {
    /// Column-level prediction for the next input, computed before seeing it.
    pub predicted_columns: Sdr,
    pub active_cells: Vec<CellId>,
    pub predictive_cells: Vec<CellId>,
    pub learning_cells: Vec<CellId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TemporalNetwork {
    version: u32,
    columns: usize,
    cfg: SmConfig,
    cells: Vec<Vec<Cell>>,
    prev_active: BTreeSet<CellId>,
    prev_winners: Vec<CellId>,
    predictions: Predictions,
}

impl TemporalNetwork {
    pub fn new(columns: usize, cfg: SmConfig) -> Self {
        let cells = (0..columns)
            .map(|_| vec![Cell::default(); cfg.cells_per_column])
            .collect();
        Self {
            version: 1,
            columns,
            cfg,
            cells,
            prev_active: BTreeSet::new(),
            prev_winners: Vec::new(),
            predictions: Predictions::default(),
        }
    }

    pub fn columns(&self) -> usize {
        self.columns
    }

    pub fn config(&self) -> &SmConfig {
        &self.cfg
    }

    pub fn cell(&self, id: CellId) -> &Cell {
        &self.cells[id.column][id.cell]
    }

    /// The column-level prediction left by the last step.
    pub fn predicted_columns(&self) -> Sdr {
        self.predictions.predicted_columns(self.columns)
    }

    /// Computes the predictive cell set for a given set of active cells.
    ///
    /// A segment fires when at least `activation_threshold` of its synapses
    /// are connected, have permanence >= theta, and point at active cells.
    pub fn compute_predictions(&self, active: &BTreeSet<CellId>) -> Predictions {
        let mut cells = BTreeMap::new();
        let mut columns = Vec::new();
        if active.is_empty() {
            return Predictions { cells, columns };
        }
        for (col, column_cells) in self.cells.iter().enumerate() {
            let mut column_hit = false;
            for (cell_idx, cell) in column_cells.iter().enumerate() {
                let mut active_segments = Vec::new();
                let mut best_score = 0;
                for (seg_idx, segment) in cell.segments.iter().enumerate() {
                    let score = self.segment_score(segment, active);
                    if score >= self.cfg.activation_threshold {
                        active_segments.push(seg_idx);
                        best_score = best_score.max(score);
                    }
                }
                if !active_segments.is_empty() {
                    cells.insert(
                        CellId { column: col, cell: cell_idx },
                        PredictionInfo { active_segments, best_score },
                    );
                    column_hit = true;
                }
            }
            if column_hit {
                columns.push(col);
            }
        }
        Predictions { cells, columns }
    }

    fn segment_score(&self, segment: &Segment, active: &BTreeSet<CellId>) -> usize {
        segment
            .synapses
            .iter()
            .filter(|s| s.connected && s.permanence >= self.cfg.theta && active.contains(&s.presynaptic))
            .count()
    }

    /// Count of synapses onto previously active cells, no permanence gate.
    /// Used to find the best matching segment in a bursting column.
    fn segment_match_score(&self, segment: &Segment, prev_active: &BTreeSet<CellId>) -> usize {
        segment
            .synapses
            .iter()
            .filter(|s| prev_active.contains(&s.presynaptic))
            .count()
    }

    /// Activates cells for the current input: predicted cells activate
    /// alone, unanticipated columns burst.
    pub fn activate(&self, r_input: &Sdr, prior: &Predictions) -> BTreeSet<CellId> {
        let mut active = BTreeSet::new();
        for &col in r_input.active() {
            let predicted: Vec<CellId> = (0..self.cfg.cells_per_column)
                .map(|cell| CellId { column: col, cell })
                .filter(|id| prior.cells.contains_key(id))
                .collect();
            if predicted.is_empty() {
                for cell in 0..self.cfg.cells_per_column {
                    active.insert(CellId { column: col, cell });
                }
            } else {
                active.extend(predicted);
            }
        }
        active
    }

    /// Picks one learning cell per active column (kWTA of one).
    ///
    /// Predicted columns: the predicted cell with the highest winner score,
    /// lowest cell index on ties. Burst columns: the cell with the best
    /// matching segment, falling back to the cell with the fewest segments.
    pub fn select_learning_cells(
        &self,
        r_input: &Sdr,
        prior: &Predictions,
        prev_active: &BTreeSet<CellId>,
    ) -> Vec<(CellId, LearnTarget)> {
        let mut selected = Vec::new();
        for &col in r_input.active() {
            let predicted: Vec<(&CellId, &PredictionInfo)> = prior
                .cells
                .range(
                    CellId { column: col, cell: 0 }..=CellId {
                        column: col,
                        cell: self.cfg.cells_per_column - 1,
                    },
                )
                .collect();
            if !predicted.is_empty() {
                let (&winner, info) = predicted
                    .iter()
                    .max_by(|(a, ia), (b, ib)| {
                        ia.best_score
                            .cmp(&ib.best_score)
                            .then(b.cell.cmp(&a.cell))
                    })
                    .map(|(id, info)| (*id, *info))
                    .unwrap();
                // Reinforce the best-scoring active segment, lowest index
                // on ties.
                let segment = info
                    .active_segments
                    .iter()
                    .copied()
                    .max_by_key(|&seg| {
                        (
                            self.segment_score(&self.cells[winner.column][winner.cell].segments[seg], prev_active),
                            std::cmp::Reverse(seg),
                        )
                    })
                    .unwrap_or(info.active_segments[0]);
                selected.push((winner, LearnTarget::Reinforce { segment }));
                continue;
            }
            // Burst column: best matching segment wins.
            let mut best: Option<(usize, CellId, usize)> = None; // (score, cell, segment)
            for cell_idx in 0..self.cfg.cells_per_column {
                let id = CellId { column: col, cell: cell_idx };
                for (seg_idx, segment) in self.cells[col][cell_idx].segments.iter().enumerate() {
                    let score = self.segment_match_score(segment, prev_active);
                    if score == 0 {
                        continue;
                    }
                    let better = match &best {
                        None => true,
                        Some((s, c, g)) => {
                            score > *s || (score == *s && (id, seg_idx) < (*c, *g))
                        }
                    };
                    if better {
                        best = Some((score, id, seg_idx));
                    }
                }
            }
            match best {
                Some((_, id, seg)) => selected.push((id, LearnTarget::Reinforce { segment: seg })),
                None => {
                    let least_used = (0..self.cfg.cells_per_column)
                        .min_by_key(|&cell| (self.cells[col][cell].segments.len(), cell))
                        .unwrap();
                    selected.push((
                        CellId { column: col, cell: least_used },
                        LearnTarget::Grow,
                    ));
                }
            }
        }
        selected
    }

    /// Applies LTP to learning cells, LTD to false predictions, and grows
    /// new segments toward the previous winner cells.
    ///
    /// `inc_factor` scales the potentiation step (1.0 for a regular update,
    /// larger for a boosted one).
    pub fn learn_step(
        &mut self,
        learning: &[(CellId, LearnTarget)],
        r_input: &Sdr,
        prior: &Predictions,
        prev_active: &BTreeSet<CellId>,
        prev_winners: &[CellId],
        inc_factor: f64,
    ) {
        let inc = self.cfg.perm_inc * inc_factor;
        let dec = self.cfg.perm_dec;
        let connect = self.cfg.synapse_connect_threshold;

        // LTP on reinforced segments.
        for &(id, target) in learning {
            match target {
                LearnTarget::Reinforce { segment } => {
                    let seg = &mut self.cells[id.column][id.cell].segments[segment];
                    for syn in &mut seg.synapses {
                        let delta = if prev_active.contains(&syn.presynaptic) { inc } else { -dec };
                        syn.permanence = (syn.permanence + delta).clamp(0.0, 1.0);
                        syn.connected = syn.permanence >= connect;
                    }
                }
                LearnTarget::Grow => {
                    if prev_winners.is_empty() {
                        continue;
                    }
                    let cell = &mut self.cells[id.column][id.cell];
                    if cell.segments.len() >= self.cfg.max_segments {
                        continue;
                    }
                    let synapses: Vec<Synapse> = prev_winners
                        .iter()
                        .take(self.cfg.max_synapses)
                        .map(|&presynaptic| Synapse {
                            presynaptic,
                            permanence: self.cfg.initial_perm,
                            connected: self.cfg.initial_perm >= connect,
                        })
                        .collect();
                    cell.segments.push(Segment { synapses });
                }
            }
        }

        // LTD: cells that predicted but whose column stayed inactive lose
        // permanence on the synapses that caused the false prediction.
        for (id, info) in &prior.cells {
            if r_input.contains(id.column) {
                continue;
            }
            for &seg_idx in &info.active_segments {
                let seg = &mut self.cells[id.column][id.cell].segments[seg_idx];
                for syn in &mut seg.synapses {
                    if prev_active.contains(&syn.presynaptic) {
                        syn.permanence = (syn.permanence - dec).clamp(0.0, 1.0);
                        syn.connected = syn.permanence >= connect;
                    }
                }
            }
        }
    }

    /// One full cycle: activate, learn, predict for the next step.
    pub fn sm_step(&mut self, r_input: &Sdr, learning: bool) -> SmStepOutput {
        self.sm_step_with(r_input, learning, 1.0)
    }

    /// [`sm_step`] with an explicit potentiation factor for boosted updates.
    pub fn sm_step_with(&mut self, r_input: &Sdr, learning: bool, inc_factor: f64) -> SmStepOutput {
        assert_eq!(r_input.width(), self.columns, "input width must match column count");
        let prior = std::mem::take(&mut self.predictions);
        let active = self.activate(r_input, &prior);
        let selected = self.select_learning_cells(r_input, &prior, &self.prev_active);
        if learning {
            let prev_active = std::mem::take(&mut self.prev_active);
            let prev_winners = std::mem::take(&mut self.prev_winners);
            self.learn_step(&selected, r_input, &prior, &prev_active, &prev_winners, inc_factor);
            self.prev_active = prev_active;
            self.prev_winners = prev_winners;
        }
        let predictions = self.compute_predictions(&active);
        debug_assert!(self.on_flags_consistent());

        let output = SmStepOutput {
            predicted_columns: predictions.predicted_columns(self.columns),
            active_cells: active.iter().copied().collect(),
            predictive_cells: predictions.cells.keys().copied().collect(),
            learning_cells: {
                let mut v: Vec<CellId> = selected.iter().map(|&(id, _)| id).collect();
                v.sort_unstable();
                v
            },
        };
        self.prev_active = active;
        self.prev_winners = output.learning_cells.clone();
        self.predictions = predictions;
        output
    }

    /// Checks the derived connected flags against the permanence values.
    pub fn on_flags_consistent(&self) -> bool {
        self.cells.iter().flatten().all(|cell| {
            cell.segments.iter().all(|seg| {
                seg.synapses
                    .iter()
                    .all(|s| s.connected == (s.permanence >= self.cfg.synapse_connect_threshold))
            })
        })
    }

    /// Total segments in the network, mostly for diagnostics.
    pub fn segment_count(&self) -> usize {
        self.cells
            .iter()
            .flatten()
            .map(|c| c.segments.len())
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_cfg(activation_threshold: usize) -> SmConfig {
        SmConfig {
            cells_per_column: 4,
            activation_threshold,
            ..SmConfig::default()
        }
    }

    fn id(column: usize, cell: usize) -> CellId {
        CellId { column, cell }
    }

    #[test]
    fn segment_activation_hand_example() {
        // Synapses ON=[1,1,1,0], perms=[0.6,0.4,0.7,0.9], theta 0.5, all
        // presynaptic active, threshold 2: qualifying count is 2, so the
        // segment fires.
        let mut net = TemporalNetwork::new(8, toy_cfg(2));
        let presyn = [id(1, 0), id(2, 0), id(3, 0), id(4, 0)];
        let perms = [0.6, 0.4, 0.7, 0.9];
        let on = [true, true, true, false];
        net.cells[0][0].segments.push(Segment {
            synapses: (0..4)
                .map(|i| Synapse { presynaptic: presyn[i], permanence: perms[i], connected: on[i] })
                .collect(),
        });
        let active: BTreeSet<CellId> = presyn.iter().copied().collect();
        let preds = net.compute_predictions(&active);
        let info = preds.cells.get(&id(0, 0)).expect("cell predicted");
        assert_eq!(info.best_score, 2);
        assert_eq!(preds.columns, vec![0]);

        // No active cells: nothing predicted.
        assert!(net.compute_predictions(&BTreeSet::new()).cells.is_empty());
        // Fresh network: nothing predicted.
        let fresh = TemporalNetwork::new(8, toy_cfg(2));
        assert!(fresh.compute_predictions(&active).cells.is_empty());
    }

    #[test]
    fn activation_rules() {
        let net = TemporalNetwork::new(4, toy_cfg(2));
        let mut prior = Predictions::default();
        prior.cells.insert(id(1, 2), PredictionInfo { active_segments: vec![0], best_score: 3 });
        prior.columns.push(1);
        let input = Sdr::new(4, vec![1, 2]).unwrap();
        let active = net.activate(&input, &prior);
        // Column 1 had a predicted cell: only that cell activates.
        assert!(active.contains(&id(1, 2)));
        assert!(!active.contains(&id(1, 0)));
        // Column 2 was unanticipated: all cells burst.
        for cell in 0..4 {
            assert!(active.contains(&id(2, cell)));
        }
        // Column 0 inactive: no active cells.
        assert!(!active.iter().any(|c| c.column == 0));
        assert_eq!(active.len(), 5);
    }

    #[test]
    fn learning_cell_selection() {
        let mut net = TemporalNetwork::new(4, toy_cfg(2));
        // Two predicted cells in column 0 with winner scores 3 and 5.
        let mut prior = Predictions::default();
        prior.cells.insert(id(0, 1), PredictionInfo { active_segments: vec![0], best_score: 3 });
        prior.cells.insert(id(0, 2), PredictionInfo { active_segments: vec![0], best_score: 5 });
        prior.columns.push(0);
        net.cells[0][1].segments.push(Segment::default());
        net.cells[0][2].segments.push(Segment::default());
        let input = Sdr::new(4, vec![0, 3]).unwrap();
        let selected = net.select_learning_cells(&input, &prior, &BTreeSet::new());
        assert_eq!(selected[0].0, id(0, 2), "higher winner score wins");
        // Column 3 bursts with no segments anywhere: least-used cell is
        // cell 0 (all tie with zero segments, lowest index wins).
        assert_eq!(selected[1], (id(3, 0), LearnTarget::Grow));

        // Single predicted cell is the learning cell.
        let mut single = Predictions::default();
        single.cells.insert(id(0, 3), PredictionInfo { active_segments: vec![0], best_score: 2 });
        single.columns.push(0);
        net.cells[0][3].segments.push(Segment::default());
        let sel = net.select_learning_cells(&Sdr::new(4, vec![0]).unwrap(), &single, &BTreeSet::new());
        assert_eq!(sel[0].0, id(0, 3));
    }

    #[test]
    fn burst_prefers_fewest_segments() {
        let mut net = TemporalNetwork::new(2, toy_cfg(2));
        net.cells[0][0].segments.push(Segment::default());
        net.cells[0][1].segments.push(Segment::default());
        // Cells 2 and 3 have no segments; lowest index 2 wins.
        let input = Sdr::new(2, vec![0]).unwrap();
        let sel = net.select_learning_cells(&input, &Predictions::default(), &BTreeSet::new());
        assert_eq!(sel[0], (id(0, 2), LearnTarget::Grow));
    }

    #[test]
    fn ltp_ltd_hand_values() {
        let mut net = TemporalNetwork::new(4, toy_cfg(1));
        let prev_active: BTreeSet<CellId> = [id(2, 0)].into_iter().collect();
        // A correctly predicting synapse at 0.6 gains perm_inc to 0.7.
        net.cells[0][0].segments.push(Segment {
            synapses: vec![Synapse { presynaptic: id(2, 0), permanence: 0.6, connected: true }],
        });
        // A false-positive predictive cell in column 1 loses perm_dec.
        net.cells[1][0].segments.push(Segment {
            synapses: vec![Synapse { presynaptic: id(2, 0), permanence: 0.6, connected: true }],
        });
        // A saturated synapse stays clamped at 1.0.
        net.cells[0][1].segments.push(Segment {
            synapses: vec![Synapse { presynaptic: id(2, 0), permanence: 1.0, connected: true }],
        });
        let mut prior = Predictions::default();
        prior.cells.insert(id(1, 0), PredictionInfo { active_segments: vec![0], best_score: 1 });
        prior.columns.push(1);
        let input = Sdr::new(4, vec![0]).unwrap(); // column 1 stays inactive
        let learning = vec![
            (id(0, 0), LearnTarget::Reinforce { segment: 0 }),
            (id(0, 1), LearnTarget::Reinforce { segment: 0 }),
        ];
        net.learn_step(&learning, &input, &prior, &prev_active, &[], 1.0);
        assert!((net.cells[0][0].segments[0].synapses[0].permanence - 0.7).abs() < 1e-12);
        assert!((net.cells[1][0].segments[0].synapses[0].permanence - 0.55).abs() < 1e-12);
        assert_eq!(net.cells[0][1].segments[0].synapses[0].permanence, 1.0);
        assert!(net.on_flags_consistent());
    }

    #[test]
    fn learning_disabled_is_noop_on_structure() {
        let mut net = TemporalNetwork::new(8, toy_cfg(2));
        let a = Sdr::new(8, vec![0, 1]).unwrap();
        let b = Sdr::new(8, vec![2, 3]).unwrap();
        for _ in 0..3 {
            net.sm_step(&a, true);
            net.sm_step(&b, true);
        }
        let cells_before = net.cells.clone();
        net.sm_step(&a, false);
        net.sm_step(&b, false);
        assert_eq!(net.cells, cells_before);
    }

    #[test]
    fn alternating_stream_predicts() {
        let mut net = TemporalNetwork::new(4, toy_cfg(2));
        let a = Sdr::new(4, vec![0, 1]).unwrap();
        let b = Sdr::new(4, vec![2, 3]).unwrap();
        let mut last_prediction = Sdr::empty(4);
        let mut hits = 0;
        let mut total = 0;
        for step in 0..60 {
            let input = if step % 2 == 0 { &a } else { &b };
            if step >= 30 {
                total += 1;
                let overlap = last_prediction.overlap_count(input).unwrap();
                if overlap * 2 >= input.active_count() {
                    hits += 1;
                }
            }
            let out = net.sm_step(input, true);
            last_prediction = out.predicted_columns;
        }
        assert_eq!(hits, total, "after warmup every step should be predicted");
    }

    #[test]
    fn cyclic_stream_converges_and_stays() {
        // Period 3 <= p on a small network: 100% column-level accuracy
        // after bounded warmup.
        let cfg = SmConfig { cells_per_column: 4, activation_threshold: 2, ..SmConfig::default() };
        let mut net = TemporalNetwork::new(8, cfg);
        let symbols = [
            Sdr::new(8, vec![0, 1]).unwrap(),
            Sdr::new(8, vec![3, 4]).unwrap(),
            Sdr::new(8, vec![6, 7]).unwrap(),
        ];
        let mut last_prediction = Sdr::empty(8);
        for step in 0..300 {
            let input = &symbols[step % 3];
            if step >= 40 {
                assert_eq!(
                    &last_prediction, input,
                    "step {step}: prediction should exactly match the cycle"
                );
            }
            let out = net.sm_step(input, true);
            last_prediction = out.predicted_columns;
        }
    }

    #[test]
    fn shared_token_contexts_get_distinct_cells() {
        // Two sequences share one middle symbol; every other transition is
        // first-order unambiguous. After training, the shared columns
        // predict through different cells per context and each context
        // predicts its own successor.
        let cfg = SmConfig { cells_per_column: 4, activation_threshold: 1, ..SmConfig::default() };
        let mut net = TemporalNetwork::new(12, cfg);
        let s = |b: usize| Sdr::new(12, vec![b]).unwrap();
        let (x1, x2, z1, z2, shared, y, w) = (s(0), s(1), s(2), s(3), s(5), s(8), s(10));
        let mut pred_after_shared_in_x = Sdr::empty(12);
        let mut pred_after_shared_in_z = Sdr::empty(12);
        for _ in 0..30 {
            net.sm_step(&x1, true);
            net.sm_step(&x2, true);
            pred_after_shared_in_x = net.sm_step(&shared, true).predicted_columns;
            net.sm_step(&y, true);
            net.sm_step(&z1, true);
            net.sm_step(&z2, true);
            pred_after_shared_in_z = net.sm_step(&shared, true).predicted_columns;
            net.sm_step(&w, true);
        }
        assert!(pred_after_shared_in_x.contains(8), "x-context predicts y");
        assert!(pred_after_shared_in_z.contains(10), "z-context predicts w");
        assert!(!pred_after_shared_in_x.contains(10));
        assert!(!pred_after_shared_in_z.contains(8));
        // The shared column resolved to different cells per context.
        let shared_cells: Vec<&Cell> = net.cells[5].iter().collect();
        let cells_with_segments = shared_cells.iter().filter(|c| !c.segments.is_empty()).count();
        assert!(cells_with_segments >= 2);
    }

    #[test]
    fn per_column_activation_bounds() {
        let cfg = toy_cfg(2);
        let p = cfg.cells_per_column;
        let mut net = TemporalNetwork::new(6, cfg);
        let inputs = [
            Sdr::new(6, vec![0, 2]).unwrap(),
            Sdr::new(6, vec![1, 4]).unwrap(),
            Sdr::new(6, vec![3, 5]).unwrap(),
        ];
        for step in 0..120 {
            let out = net.sm_step(&inputs[step % 3], true);
            for &col in inputs[step % 3].active() {
                let count = out.active_cells.iter().filter(|c| c.column == col).count();
                assert!(count >= 1 && count <= p);
            }
            assert!(net.on_flags_consistent());
        }
    }

    // Independent full scan over every cell, segment, and synapse.
    fn brute_force_predictions(
        net: &TemporalNetwork,
        active: &BTreeSet<CellId>,
    ) -> BTreeMap<CellId, usize> {
        let mut result = BTreeMap::new();
        if active.is_empty() {
            return result;
        }
        for col in 0..net.columns() {
            for cell in 0..net.config().cells_per_column {
                let mut best = 0usize;
                let mut any = false;
                for seg in &net.cell(CellId { column: col, cell }).segments {
                    let mut count = 0usize;
                    for syn in &seg.synapses {
                        let on = syn.permanence >= net.config().synapse_connect_threshold;
                        let votes = syn.permanence >= net.config().theta;
                        if on && votes && active.contains(&syn.presynaptic) {
                            count += 1;
                        }
                    }
                    if count >= net.config().activation_threshold {
                        any = true;
                        best = best.max(count);
                    }
                }
                if any {
                    result.insert(CellId { column: col, cell }, best);
                }
            }
        }
        result
    }

    #[test]
    fn predictions_match_brute_force_scan() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(12);
        let cfg = SmConfig { cells_per_column: 3, activation_threshold: 2, ..SmConfig::default() };
        let mut net = TemporalNetwork::new(6, cfg);
        for col in 0..6 {
            for cell in 0..3 {
                for _ in 0..rng.random_range(0..3) {
                    let synapses = (0..rng.random_range(1..6))
                        .map(|_| {
                            let perm: f64 = rng.random_range(0.0..1.0);
                            Synapse {
                                presynaptic: id(rng.random_range(0..6), rng.random_range(0..3)),
                                permanence: perm,
                                connected: perm >= 0.5,
                            }
                        })
                        .collect();
                    net.cells[col][cell].segments.push(Segment { synapses });
                }
            }
        }
        for trial in 0..50 {
            let mut active = BTreeSet::new();
            for _ in 0..rng.random_range(0..8) {
                active.insert(id(rng.random_range(0..6), rng.random_range(0..3)));
            }
            let fast = net.compute_predictions(&active);
            let slow = brute_force_predictions(&net, &active);
            let fast_scores: BTreeMap<CellId, usize> = fast
                .cells
                .iter()
                .map(|(&id, info)| (id, info.best_score))
                .collect();
            assert_eq!(fast_scores, slow, "trial {trial}");
        }
    }
}
