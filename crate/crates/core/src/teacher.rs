//! Simulated-teacher protocol for open-ended evaluation.
//!
//! The teacher starts with an agent that knows nothing and drives it with
//! three actions:
//!
//! - **teach**: introduce a new category with `intro_views` random views;
//! - **ask**: show an unseen view of a known category and compare the
//!   agent's answer with the truth;
//! - **correct**: after a wrong answer, teach that view under its true label.
//!
//! Protocol accuracy is measured over a sliding window of the last
//! `window_factor · n` asks, where `n` is the number of categories
//! introduced so far. The window only covers asks since the most recent
//! introduction; while fewer asks than the window have happened, all of
//! them count. After each ask, once every known category has been asked at
//! least once since the last introduction (`k ≥ n`), a window accuracy
//! above `tau` triggers the next introduction. The run ends when the final
//! category passes the threshold (`all_learned`), when `stall_budget` asks
//! pass without an introduction (`stalled`), or, with reuse disabled, when a
//! category runs out of unseen views (`pool_exhausted`).
//!
//! Test views are chosen by a seeded round-robin over known categories that
//! restarts at each introduction, drawing without replacement from each
//! category's pool. An exhausted pool is refilled with all of that
//! category's views reshuffled and later draws are flagged `reused`.

use std::collections::{BTreeMap, VecDeque};
use std::fmt::Write as _;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::memory::{FeatureView, PerceptualMemory, RecognizerConfig};
use crate::offline_eval::Dataset;
use crate::stats;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolConfig {
    #[serde(default = "default_tau")]
    pub tau: f64,
    #[serde(default = "default_intro_views")]
    pub intro_views: usize,
    #[serde(default = "default_window_factor")]
    pub window_factor: usize,
    #[serde(default = "default_stall_budget")]
    pub stall_budget: usize,
    #[serde(default)]
    pub seed: u64,
    /// Refill exhausted category pools instead of terminating.
    #[serde(default = "default_allow_reuse")]
    pub allow_reuse: bool,
}

fn default_tau() -> f64 {
    0.8
}
fn default_intro_views() -> usize {
    3
}
fn default_window_factor() -> usize {
    3
}
fn default_stall_budget() -> usize {
    100
}
fn default_allow_reuse() -> bool {
    true
}

impl Default for ProtocolConfig {
    fn default() -> Self {
        ProtocolConfig {
            tau: default_tau(),
            intro_views: default_intro_views(),
            window_factor: default_window_factor(),
            stall_budget: default_stall_budget(),
            seed: 0,
            allow_reuse: default_allow_reuse(),
        }
    }
}

impl ProtocolConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.tau > 0.0 && self.tau < 1.0) {
            return Err(Error::InvalidParams(format!("tau {} outside (0, 1)", self.tau)));
        }
        if self.intro_views == 0 || self.window_factor == 0 || self.stall_budget == 0 {
            return Err(Error::InvalidParams(
                "intro_views, window_factor and stall_budget must be >= 1".into(),
            ));
        }
        Ok(())
    }
}

/// The learning agent as seen by the teacher.
pub trait AgentPort {
    fn teach(&mut self, label: &str, view: &FeatureView) -> Result<()>;
    fn ask(&mut self, view: &FeatureView) -> Result<String>;
}

/// Agent backed by a [`PerceptualMemory`]. Ignores the query's category.
#[derive(Clone, Debug)]
pub struct MemoryAgent {
    pub memory: PerceptualMemory,
}

impl MemoryAgent {
    pub fn new(config: RecognizerConfig) -> Result<Self> {
        Ok(MemoryAgent {
            memory: PerceptualMemory::new(config)?,
        })
    }
}

impl AgentPort for MemoryAgent {
    fn teach(&mut self, label: &str, view: &FeatureView) -> Result<()> {
        self.memory.teach(label, view.clone())
    }

    fn ask(&mut self, view: &FeatureView) -> Result<String> {
        let mut query = view.clone();
        query.category.clear();
        Ok(self.memory.classify(&query)?.label)
    }
}

/// Stub that reads the ground truth off the query and always answers it.
#[derive(Clone, Debug, Default)]
pub struct AlwaysCorrect;

impl AgentPort for AlwaysCorrect {
    fn teach(&mut self, _: &str, _: &FeatureView) -> Result<()> {
        Ok(())
    }

    fn ask(&mut self, view: &FeatureView) -> Result<String> {
        Ok(view.category.clone())
    }
}

/// Stub that never answers the true category.
#[derive(Clone, Debug, Default)]
pub struct AlwaysWrong;

impl AgentPort for AlwaysWrong {
    fn teach(&mut self, _: &str, _: &FeatureView) -> Result<()> {
        Ok(())
    }

    fn ask(&mut self, view: &FeatureView) -> Result<String> {
        Ok(format!("not-{}", view.category))
    }
}

/// Stub that answers correctly with probability `p`.
#[derive(Clone, Debug)]
pub struct CoinFlip {
    pub p: f64,
    rng: ChaCha8Rng,
}

impl CoinFlip {
    pub fn new(p: f64, seed: u64) -> Self {
        CoinFlip {
            p,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }
}

impl AgentPort for CoinFlip {
    fn teach(&mut self, _: &str, _: &FeatureView) -> Result<()> {
        Ok(())
    }

    fn ask(&mut self, view: &FeatureView) -> Result<String> {
        if self.rng.random_bool(self.p) {
            Ok(view.category.clone())
        } else {
            Ok(format!("not-{}", view.category))
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    Teach,
    Ask,
    Correct,
}

impl Action {
    pub fn name(self) -> &'static str {
        match self {
            Action::Teach => "teach",
            Action::Ask => "ask",
            Action::Correct => "correct",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Outcome {
    /// Number of asks issued so far, this one included for ask/correct.
    pub iteration: usize,
    /// Categories introduced at the time of the action.
    pub n: usize,
    pub action: Action,
    pub category: String,
    pub instance_id: String,
    pub view_id: String,
    /// Agent's answer (ask records only).
    pub predicted: Option<String>,
    pub correct: Option<bool>,
    pub reused: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    AllLearned,
    Stalled,
    PoolExhausted,
}

/// What [`ProtocolState::ask_step`] did.
#[derive(Clone, Debug, PartialEq)]
pub enum AskResult {
    Asked { correct: bool },
    PoolExhausted { category: String },
}

#[derive(Clone, Debug)]
pub struct ProtocolState<'a> {
    dataset: &'a Dataset,
    cfg: ProtocolConfig,
    rng: ChaCha8Rng,
    /// Seeded order in which categories will be introduced.
    order: Vec<String>,
    views_of: BTreeMap<String, Vec<usize>>,
    unseen: BTreeMap<String, VecDeque<usize>>,
    reused: BTreeMap<String, bool>,
    cycle: VecDeque<String>,
    pub introduced: Vec<String>,
    pub outcomes: Vec<Outcome>,
    /// Ask outcomes since the last introduction.
    recent: Vec<bool>,
    asks: usize,
    stored: usize,
}

impl<'a> ProtocolState<'a> {
    pub fn new(dataset: &'a Dataset, cfg: ProtocolConfig) -> Result<Self> {
        cfg.validate()?;
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        let views_of: BTreeMap<String, Vec<usize>> = dataset
            .by_category()
            .into_iter()
            .map(|(c, v)| (c.to_string(), v))
            .collect();
        let mut order: Vec<String> = views_of.keys().cloned().collect();
        order.shuffle(&mut rng);
        let mut unseen = BTreeMap::new();
        for (c, idxs) in &views_of {
            let mut pool = idxs.clone();
            pool.shuffle(&mut rng);
            unseen.insert(c.clone(), VecDeque::from(pool));
        }
        Ok(ProtocolState {
            dataset,
            reused: views_of.keys().map(|c| (c.clone(), false)).collect(),
            cfg,
            rng,
            order,
            views_of,
            unseen,
            cycle: VecDeque::new(),
            introduced: Vec::new(),
            outcomes: Vec::new(),
            recent: Vec::new(),
            asks: 0,
            stored: 0,
        })
    }

    pub fn config(&self) -> &ProtocolConfig {
        &self.cfg
    }

    pub fn n(&self) -> usize {
        self.introduced.len()
    }

    /// Asks since the last introduction.
    pub fn k(&self) -> usize {
        self.recent.len()
    }

    pub fn stored_instances(&self) -> usize {
        self.stored
    }

    pub fn all_introduced(&self) -> bool {
        self.introduced.len() == self.order.len()
    }

    fn log(&mut self, action: Action, view: usize, predicted: Option<String>, correct: Option<bool>, reused: bool) {
        let v = &self.dataset.views[view];
        self.outcomes.push(Outcome {
            iteration: self.asks,
            n: self.introduced.len(),
            action,
            category: v.category.clone(),
            instance_id: v.instance_id.clone(),
            view_id: v.view_id.clone(),
            predicted,
            correct,
            reused,
        });
    }

    /// Introduces the next category. Returns `false` when every category is
    /// already known.
    pub fn introduce_category(&mut self, agent: &mut dyn AgentPort) -> Result<bool> {
        let Some(category) = self.order.get(self.introduced.len()).cloned() else {
            return Ok(false);
        };
        let pool = self.unseen.get_mut(&category).expect("pool per category");
        if pool.len() < self.cfg.intro_views {
            return Err(Error::InsufficientViews {
                category,
                have: pool.len(),
                need: self.cfg.intro_views,
            });
        }
        let picked: Vec<usize> = pool.drain(..self.cfg.intro_views).collect();
        self.introduced.push(category.clone());
        for i in picked {
            agent.teach(&category, &self.dataset.views[i])?;
            self.stored += 1;
            self.log(Action::Teach, i, None, None, false);
        }
        self.recent.clear();
        self.cycle.clear();
        Ok(true)
    }

    fn next_target(&mut self) -> String {
        if self.cycle.is_empty() {
            let mut cats = self.introduced.clone();
            cats.shuffle(&mut self.rng);
            self.cycle = VecDeque::from(cats);
        }
        self.cycle.pop_front().expect("at least one introduced category")
    }

    /// One ask (plus a correction if the answer was wrong).
    pub fn ask_step(&mut self, agent: &mut dyn AgentPort) -> Result<AskResult> {
        if self.introduced.is_empty() {
            return Err(Error::Undefined("ask before any category was introduced".into()));
        }
        let category = self.next_target();
        if self.unseen[&category].is_empty() {
            if !self.cfg.allow_reuse {
                return Ok(AskResult::PoolExhausted { category });
            }
            let mut all = self.views_of[&category].clone();
            all.shuffle(&mut self.rng);
            self.unseen.insert(category.clone(), VecDeque::from(all));
            self.reused.insert(category.clone(), true);
        }
        let view = self
            .unseen
            .get_mut(&category)
            .and_then(VecDeque::pop_front)
            .expect("refilled pool");
        let reused = self.reused[&category];

        self.asks += 1;
        let predicted = agent.ask(&self.dataset.views[view])?;
        let correct = predicted == category;
        self.log(Action::Ask, view, Some(predicted), Some(correct), reused);
        if !correct {
            agent.teach(&category, &self.dataset.views[view])?;
            self.stored += 1;
            self.log(Action::Correct, view, None, None, reused);
        }
        self.recent.push(correct);
        Ok(AskResult::Asked { correct })
    }

    /// Accuracy over the last `min(k, window_factor · n)` asks since the
    /// last introduction.
    pub fn window_accuracy(&self) -> Result<f64> {
        if self.recent.is_empty() {
            return Err(Error::Undefined("no asks since the last introduction".into()));
        }
        let window = self.recent.len().min(self.cfg.window_factor * self.n());
        let tail = &self.recent[self.recent.len() - window..];
        Ok(tail.iter().filter(|&&c| c).count() as f64 / window as f64)
    }
}

/// Asks issued and corrections made while `n` categories were known.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuestionCorrections {
    pub n: usize,
    pub questions: usize,
    pub corrections: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub categories_learned: usize,
    pub termination: Termination,
    pub total_asks: usize,
    pub total_corrections: usize,
    pub stored_instances: usize,
    /// Correct asks / total asks over the whole run (instance accuracy).
    pub global_accuracy: f64,
    /// Mean over asked categories of their ask accuracy.
    pub class_accuracy: f64,
    pub average_protocol_accuracy: f64,
    pub reused_asks: usize,
    /// One point per ask.
    pub n_curve: Vec<usize>,
    pub protocol_accuracy_curve: Vec<f64>,
    pub global_accuracy_curve: Vec<f64>,
    pub stored_instances_curve: Vec<usize>,
    pub questions_corrections_per_n: Vec<QuestionCorrections>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtocolRun {
    pub config: ProtocolConfig,
    pub report: ProtocolReport,
    pub log: Vec<Outcome>,
}

/// Runs the full teach/ask/correct loop against `agent`.
pub fn run_protocol(
    dataset: &Dataset,
    cfg: &ProtocolConfig,
    agent: &mut dyn AgentPort,
) -> Result<ProtocolRun> {
    let mut state = ProtocolState::new(dataset, cfg.clone())?;
    state.introduce_category(agent)?;

    let mut n_curve = Vec::new();
    let mut window_curve = Vec::new();
    let mut stored_curve = Vec::new();

    let termination = loop {
        match state.ask_step(agent)? {
            AskResult::PoolExhausted { .. } => break Termination::PoolExhausted,
            AskResult::Asked { .. } => {}
        }
        let acc = state.window_accuracy()?;
        n_curve.push(state.n());
        window_curve.push(acc);
        stored_curve.push(state.stored_instances());

        if state.k() >= state.n() && acc > cfg.tau {
            if state.all_introduced() {
                break Termination::AllLearned;
            }
            state.introduce_category(agent)?;
        } else if state.k() >= cfg.stall_budget {
            break Termination::Stalled;
        }
    };

    let log = state.outcomes;
    let report = assemble_report(&log, termination, n_curve, window_curve, stored_curve, state.stored);
    Ok(ProtocolRun {
        config: cfg.clone(),
        report,
        log,
    })
}

fn assemble_report(
    log: &[Outcome],
    termination: Termination,
    n_curve: Vec<usize>,
    protocol_accuracy_curve: Vec<f64>,
    stored_instances_curve: Vec<usize>,
    stored_instances: usize,
) -> ProtocolReport {
    let mut correct_so_far = 0usize;
    let mut global_accuracy_curve = Vec::new();
    let mut per_category: BTreeMap<&str, (usize, usize)> = BTreeMap::new();
    let mut per_n: BTreeMap<usize, (usize, usize)> = BTreeMap::new();
    let mut reused_asks = 0;
    let mut categories_learned = 0;

    for o in log {
        categories_learned = categories_learned.max(o.n);
        match o.action {
            Action::Ask => {
                let ok = o.correct == Some(true);
                correct_so_far += ok as usize;
                global_accuracy_curve.push(correct_so_far as f64 / (global_accuracy_curve.len() + 1) as f64);
                let c = per_category.entry(o.category.as_str()).or_default();
                c.0 += 1;
                c.1 += ok as usize;
                per_n.entry(o.n).or_default().0 += 1;
                reused_asks += o.reused as usize;
            }
            Action::Correct => per_n.entry(o.n).or_default().1 += 1,
            Action::Teach => {}
        }
    }
    let total_asks = global_accuracy_curve.len();
    let total_corrections = per_n.values().map(|v| v.1).sum();
    let class_acc: Vec<f64> = per_category
        .values()
        .map(|(asked, ok)| *ok as f64 / *asked as f64)
        .collect();

    ProtocolReport {
        categories_learned,
        termination,
        total_asks,
        total_corrections,
        stored_instances,
        global_accuracy: if total_asks == 0 {
            f64::NAN
        } else {
            correct_so_far as f64 / total_asks as f64
        },
        class_accuracy: stats::mean(&class_acc),
        average_protocol_accuracy: stats::mean(&protocol_accuracy_curve),
        reused_asks,
        n_curve,
        protocol_accuracy_curve,
        global_accuracy_curve,
        stored_instances_curve,
        questions_corrections_per_n: per_n
            .into_iter()
            .map(|(n, (questions, corrections))| QuestionCorrections {
                n,
                questions,
                corrections,
            })
            .collect(),
    }
}

/// `iteration,n,window_accuracy,global_accuracy,stored_instances`, one row
/// per ask.
pub fn curves_csv(report: &ProtocolReport) -> String {
    let mut out = String::from("iteration,n,window_accuracy,global_accuracy,stored_instances\n");
    for i in 0..report.protocol_accuracy_curve.len() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            i + 1,
            report.n_curve[i],
            report.protocol_accuracy_curve[i],
            report.global_accuracy_curve[i],
            report.stored_instances_curve[i]
        );
    }
    out
}

/// The full outcome log as CSV.
pub fn log_csv(log: &[Outcome]) -> String {
    let mut out =
        String::from("iteration,n,action,category,instance_id,view_id,predicted,correct,reused\n");
    for o in log {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            o.iteration,
            o.n,
            o.action.name(),
            o.category,
            o.instance_id,
            o.view_id,
            o.predicted.as_deref().unwrap_or(""),
            o.correct.map(|c| c.to_string()).unwrap_or_default(),
            o.reused
        );
    }
    out
}

/// One row of a repeated-run table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatRow {
    pub run: usize,
    pub seed: u64,
    pub instance_accuracy: f64,
    pub class_accuracy: f64,
    pub categories_learned: usize,
    pub total_asks: usize,
    pub stored_instances: usize,
    pub termination: Termination,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SummaryStat {
    pub instance_accuracy: f64,
    pub class_accuracy: f64,
    pub categories_learned: f64,
    pub total_asks: f64,
    pub stored_instances: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RepeatSummary {
    pub rows: Vec<RepeatRow>,
    pub avg: SummaryStat,
    /// Sample standard deviation.
    pub std: SummaryStat,
}

impl RepeatSummary {
    pub fn from_runs(runs: &[ProtocolRun]) -> Self {
        let rows: Vec<RepeatRow> = runs
            .iter()
            .enumerate()
            .map(|(i, r)| RepeatRow {
                run: i + 1,
                seed: r.config.seed,
                instance_accuracy: r.report.global_accuracy,
                class_accuracy: r.report.class_accuracy,
                categories_learned: r.report.categories_learned,
                total_asks: r.report.total_asks,
                stored_instances: r.report.stored_instances,
                termination: r.report.termination,
            })
            .collect();
        let col = |f: &dyn Fn(&RepeatRow) -> f64| rows.iter().map(f).collect::<Vec<f64>>();
        let columns = [
            col(&|r| r.instance_accuracy),
            col(&|r| r.class_accuracy),
            col(&|r| r.categories_learned as f64),
            col(&|r| r.total_asks as f64),
            col(&|r| r.stored_instances as f64),
        ];
        let stat = |f: fn(&[f64]) -> f64| SummaryStat {
            instance_accuracy: f(&columns[0]),
            class_accuracy: f(&columns[1]),
            categories_learned: f(&columns[2]),
            total_asks: f(&columns[3]),
            stored_instances: f(&columns[4]),
        };
        RepeatSummary {
            avg: stat(stats::mean),
            std: stat(stats::sample_std),
            rows,
        }
    }

    /// Table with one line per run followed by `Avg` and `Std` rows.
    pub fn table(&self) -> String {
        let mut out = String::from("Num\tIns.Acc\tCls.Acc\tLearned\tAsks\tStored\n");
        for r in &self.rows {
            let _ = writeln!(
                out,
                "{}\t{:.4}\t{:.4}\t{}\t{}\t{}",
                r.run, r.instance_accuracy, r.class_accuracy, r.categories_learned, r.total_asks, r.stored_instances
            );
        }
        for (name, s) in [("Avg", &self.avg), ("Std", &self.std)] {
            let _ = writeln!(
                out,
                "{name}\t{:.4}\t{:.4}\t{:.2}\t{:.2}\t{:.2}",
                s.instance_accuracy, s.class_accuracy, s.categories_learned, s.total_asks, s.stored_instances
            );
        }
        out
    }
}

/// Runs the protocol `repeats` times with seeds `cfg.seed + 0 .. repeats`,
/// each against a fresh agent from `make_agent`. Runs execute in parallel;
/// results are ordered by run index.
pub fn run_repeats<A, F>(
    dataset: &Dataset,
    cfg: &ProtocolConfig,
    repeats: usize,
    make_agent: F,
) -> Result<Vec<ProtocolRun>>
where
    A: AgentPort,
    F: Fn() -> Result<A> + Sync,
{
    (0..repeats as u64)
        .into_par_iter()
        .map(|i| {
            let mut run_cfg = cfg.clone();
            run_cfg.seed = cfg.seed.wrapping_add(i);
            let mut agent = make_agent()?;
            run_protocol(dataset, &run_cfg, &mut agent)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::metrics::Histogram;

    fn dataset(categories: usize, per_cat: usize) -> Dataset {
        let mut views = Vec::new();
        for c in 0..categories {
            for i in 0..per_cat {
                let mut v = vec![0.0; categories];
                v[c] = 1.0;
                let mut fv = FeatureView::hand_only(format!("c{c:02}"), Histogram::new(v).unwrap());
                fv.instance_id = format!("c{c:02}_i");
                fv.view_id = format!("{i:03}");
                views.push(fv);
            }
        }
        Dataset::new("toy", views)
    }

    #[test]
    fn first_introduction_teaches_three_views() {
        let ds = dataset(3, 5);
        let mut st = ProtocolState::new(&ds, ProtocolConfig::default()).unwrap();
        assert!(st.introduce_category(&mut AlwaysCorrect).unwrap());
        assert_eq!(st.n(), 1);
        assert_eq!(st.stored_instances(), 3);
        assert_eq!(st.outcomes.iter().filter(|o| o.action == Action::Teach).count(), 3);
    }

    #[test]
    fn introduction_is_seeded() {
        let ds = dataset(6, 5);
        let run = |seed| {
            let cfg = ProtocolConfig { seed, ..ProtocolConfig::default() };
            let mut st = ProtocolState::new(&ds, cfg).unwrap();
            st.introduce_category(&mut AlwaysCorrect).unwrap();
            st.introduce_category(&mut AlwaysCorrect).unwrap();
            st.outcomes
        };
        assert_eq!(run(4), run(4));
    }

    #[test]
    fn small_pool_is_rejected() {
        let ds = dataset(1, 2);
        let mut st = ProtocolState::new(&ds, ProtocolConfig::default()).unwrap();
        assert!(matches!(
            st.introduce_category(&mut AlwaysCorrect),
            Err(Error::InsufficientViews { have: 2, need: 3, .. })
        ));
    }

    #[test]
    fn window_accuracy_examples() {
        let ds = dataset(2, 20);
        let mut st = ProtocolState::new(&ds, ProtocolConfig::default()).unwrap();
        st.introduce_category(&mut AlwaysCorrect).unwrap();
        assert!(matches!(st.window_accuracy(), Err(Error::Undefined(_))));
        st.ask_step(&mut AlwaysCorrect).unwrap();
        st.ask_step(&mut AlwaysCorrect).unwrap();
        assert_eq!(st.window_accuracy().unwrap(), 1.0);

        // n = 2, window 6, last six outcomes hold four correct answers.
        st.introduce_category(&mut AlwaysCorrect).unwrap();
        st.recent = vec![false, false, false, false, true, true, false, true, true, false];
        assert!((st.window_accuracy().unwrap() - 4.0 / 6.0).abs() < 1e-15);
        let mut longer = vec![true];
        longer.extend_from_slice(&st.recent);
        let at_boundary = {
            st.recent = st.recent[4..].to_vec();
            st.window_accuracy().unwrap()
        };
        st.recent = longer;
        assert_eq!(st.window_accuracy().unwrap(), at_boundary);
    }

    #[test]
    fn stubs_and_corrections() {
        let ds = dataset(4, 10);
        let mut st = ProtocolState::new(&ds, ProtocolConfig::default()).unwrap();
        st.introduce_category(&mut AlwaysWrong).unwrap();
        for _ in 0..7 {
            st.ask_step(&mut AlwaysWrong).unwrap();
        }
        assert_eq!(st.stored_instances(), 3 + 7);
        let corrections = st.outcomes.iter().filter(|o| o.action == Action::Correct).count();
        assert_eq!(corrections, 7);
    }

    #[test]
    fn perfect_agent_learns_everything() {
        let ds = dataset(5, 10);
        let run = run_protocol(&ds, &ProtocolConfig::default(), &mut AlwaysCorrect).unwrap();
        assert_eq!(run.report.termination, Termination::AllLearned);
        assert_eq!(run.report.total_asks, 15);
        assert_eq!(run.report.total_corrections, 0);
        assert_eq!(run.report.global_accuracy, 1.0);
        assert_eq!(run.report.stored_instances, 15);
    }

    #[test]
    fn wrong_agent_stalls() {
        let ds = dataset(3, 10);
        let cfg = ProtocolConfig { stall_budget: 25, ..ProtocolConfig::default() };
        let run = run_protocol(&ds, &cfg, &mut AlwaysWrong).unwrap();
        assert_eq!(run.report.termination, Termination::Stalled);
        assert_eq!(run.report.total_asks, 25);
        assert_eq!(run.report.categories_learned, 1);
        assert_eq!(run.report.stored_instances, 28);
        assert!(run.report.reused_asks > 0);
    }

    #[test]
    fn reuse_can_be_disabled() {
        let ds = dataset(2, 5);
        let cfg = ProtocolConfig { allow_reuse: false, ..ProtocolConfig::default() };
        let run = run_protocol(&ds, &cfg, &mut AlwaysWrong).unwrap();
        assert_eq!(run.report.termination, Termination::PoolExhausted);
        assert_eq!(run.report.total_asks, 2);
    }

    #[test]
    fn memory_agent_learns_separable_categories() {
        let ds = dataset(2, 10);
        let mut agent = MemoryAgent::new(RecognizerConfig::hand(crate::MetricId::Manhattan, 1)).unwrap();
        let run = run_protocol(&ds, &ProtocolConfig::default(), &mut agent).unwrap();
        assert_eq!(run.report.termination, Termination::AllLearned);
        assert_eq!(*run.report.protocol_accuracy_curve.last().unwrap(), 1.0);
        assert_eq!(agent.memory.stored_instances(), run.report.stored_instances);
    }

    #[test]
    fn repeats_table_has_avg_and_std() {
        let ds = dataset(3, 10);
        let runs = run_repeats(&ds, &ProtocolConfig::default(), 4, || Ok(CoinFlip::new(0.9, 1))).unwrap();
        let summary = RepeatSummary::from_runs(&runs);
        assert_eq!(summary.rows.len(), 4);
        assert_eq!(summary.rows[2].seed, 2);
        let table = summary.table();
        assert!(table.contains("\nAvg\t") && table.contains("\nStd\t"));
    }
}
