use std::sync::{Arc, Mutex, RwLock};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::optim::UpdateRule;
use crate::policy::{Gradients, NetParams};

/// Immutable view of the global network at one version.
#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub params: NetParams,
    /// Running statistics of the update rule (empty for plain descent).
    pub stats: Vec<f64>,
    pub version: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    Read,
    Apply,
}

/// One entry of the update log. For `Read` the version is the one observed,
/// for `Apply` the version produced.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct UpdateEvent {
    pub kind: EventKind,
    pub version: u64,
    pub episode: u64,
    pub worker: usize,
}

/// Shared parameters. Readers take an `Arc` to a complete snapshot; an update
/// builds the next snapshot and swaps it in under the write lock.
#[derive(Debug)]
pub struct GlobalStore {
    rule: UpdateRule,
    current: RwLock<Arc<Snapshot>>,
    log: Mutex<Vec<UpdateEvent>>,
}

impl GlobalStore {
    pub fn new(params: NetParams, rule: UpdateRule) -> Self {
        let stats = match rule {
            UpdateRule::Plain => Vec::new(),
            UpdateRule::RmsProp { .. } => vec![0.0; params.data.len()],
        };
        Self::from_snapshot(
            Snapshot {
                params,
                stats,
                version: 0,
            },
            rule,
        )
    }

    pub fn from_snapshot(snap: Snapshot, rule: UpdateRule) -> Self {
        Self {
            rule,
            current: RwLock::new(Arc::new(snap)),
            log: Mutex::new(Vec::new()),
        }
    }

    pub fn rule(&self) -> UpdateRule {
        self.rule
    }

    /// Current snapshot, without logging.
    pub fn peek(&self) -> Arc<Snapshot> {
        self.current.read().expect("store lock").clone()
    }

    pub fn version(&self) -> u64 {
        self.peek().version
    }

    /// Snapshot taken by a worker at the start of an episode; logged.
    pub fn snapshot(&self, episode: u64, worker: usize) -> Arc<Snapshot> {
        let snap = self.peek();
        self.log.lock().expect("log lock").push(UpdateEvent {
            kind: EventKind::Read,
            version: snap.version,
            episode,
            worker,
        });
        snap
    }

    /// `params -= lr * grads` (or the RMSProp-scaled step) and bump the version.
    pub fn apply_update(&self, grads: &Gradients, lr: f64, episode: u64, worker: usize) -> Result<u64> {
        if !grads.is_finite() {
            return Err(Error::Divergence("non-finite gradients offered to the global store".into()));
        }
        let mut guard = self.current.write().expect("store lock");
        if grads.data.len() != guard.params.data.len() {
            return Err(Error::ShapeMismatch(format!(
                "gradient has {} entries, parameters {}",
                grads.data.len(),
                guard.params.data.len()
            )));
        }
        let mut next = Snapshot::clone(&guard);
        self.rule.apply(&mut next.params.data, &mut next.stats, &grads.data, lr);
        next.version += 1;
        let v = next.version;
        *guard = Arc::new(next);
        // logged while the write lock is held so log order equals version order
        self.log.lock().expect("log lock").push(UpdateEvent {
            kind: EventKind::Apply,
            version: v,
            episode,
            worker,
        });
        Ok(v)
    }

    pub fn log(&self) -> Vec<UpdateEvent> {
        self.log.lock().expect("log lock").clone()
    }
}

/// Check the delayed-update contract on a log: one read per episode, applies
/// numbered consecutively from `first_version + 1`, at most one apply per
/// episode and never before its read. Returns the number of applies.
pub fn verify_update_log(log: &[UpdateEvent], first_version: u64) -> std::result::Result<usize, String> {
    use std::collections::HashMap;
    let mut reads: HashMap<u64, usize> = HashMap::new();
    let mut applied: HashMap<u64, usize> = HashMap::new();
    let mut expect = first_version + 1;
    for e in log {
        match e.kind {
            EventKind::Read => {
                if reads.insert(e.episode, 1).is_some() {
                    return Err(format!("episode {} read the global store more than once", e.episode));
                }
            }
            EventKind::Apply => {
                if !reads.contains_key(&e.episode) {
                    return Err(format!("episode {} applied without a read", e.episode));
                }
                if applied.insert(e.episode, 1).is_some() {
                    return Err(format!("episode {} applied twice", e.episode));
                }
                if e.version != expect {
                    return Err(format!("version {} applied where {expect} was due", e.version));
                }
                expect += 1;
            }
        }
    }
    Ok(applied.len())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::PolicyArch;

    fn tiny() -> NetParams {
        let mut p = NetParams::zeros(PolicyArch {
            conv1: 1,
            conv2: 1,
            conv3: 1,
            dense: 2,
        });
        for (i, v) in p.data.iter_mut().enumerate() {
            *v = (i as f64 * 0.37).sin();
        }
        p
    }

    #[test]
    fn zero_update_bumps_version_only() {
        let p = tiny();
        let s = GlobalStore::new(p.clone(), UpdateRule::Plain);
        let g = Gradients::zeros_like(&p);
        assert_eq!(s.apply_update(&g, 0.1, 0, 0).unwrap(), 1);
        assert_eq!(s.peek().params, p);
        assert_eq!(s.version(), 1);
    }

    #[test]
    fn plain_updates_are_linear() {
        let p = tiny();
        let mut g1 = Gradients::zeros_like(&p);
        let mut g2 = Gradients::zeros_like(&p);
        for i in 0..p.data.len() {
            g1.data[i] = (i as f64).cos();
            g2.data[i] = 0.5 - (i % 3) as f64;
        }
        let a = GlobalStore::new(p.clone(), UpdateRule::Plain);
        a.apply_update(&g1, 0.01, 0, 0).unwrap();
        a.apply_update(&g2, 0.01, 1, 0).unwrap();
        let b = GlobalStore::new(p, UpdateRule::Plain);
        let mut sum = g1.clone();
        sum.add(&g2);
        b.apply_update(&sum, 0.01, 0, 0).unwrap();
        for (x, y) in a.peek().params.data.iter().zip(&b.peek().params.data) {
            assert!((x - y).abs() < 1e-15);
        }
        assert_eq!(a.version(), 2);
        assert_eq!(b.version(), 1);
    }

    #[test]
    fn shape_and_finiteness_checked() {
        let p = tiny();
        let s = GlobalStore::new(p.clone(), UpdateRule::default());
        let short = Gradients { data: vec![0.0; 3] };
        assert!(matches!(s.apply_update(&short, 0.1, 0, 0), Err(Error::ShapeMismatch(_))));
        let mut bad = Gradients::zeros_like(&p);
        bad.data[0] = f64::NAN;
        assert!(s.apply_update(&bad, 0.1, 0, 0).is_err());
        assert_eq!(s.version(), 0);
    }

    #[test]
    fn concurrent_snapshots_are_whole_versions() {
        let mut p = tiny();
        let n = p.data.len();
        // integer entries keep the subtraction exact
        for (i, v) in p.data.iter_mut().enumerate() {
            *v = i as f64;
        }
        let s = GlobalStore::new(p, UpdateRule::Plain);
        // each update subtracts 1 from every entry, so a snapshot of version v
        // has every entry equal to its initial value minus v
        let init = s.peek().params.data.clone();
        let g = Gradients { data: vec![1.0; n] };
        std::thread::scope(|sc| {
            sc.spawn(|| {
                for e in 0..200 {
                    s.apply_update(&g, 1.0, e, 0).unwrap();
                }
            });
            for _ in 0..4 {
                sc.spawn(|| {
                    for _ in 0..200 {
                        let snap = s.peek();
                        let v = snap.version as f64;
                        assert!(snap.params.data.iter().zip(&init).all(|(a, b)| *a == b - v));
                    }
                });
            }
        });
        assert_eq!(s.version(), 200);
    }

    #[test]
    fn log_verification() {
        let p = tiny();
        let s = GlobalStore::new(p.clone(), UpdateRule::Plain);
        let g = Gradients::zeros_like(&p);
        s.snapshot(0, 0);
        s.snapshot(1, 1);
        s.apply_update(&g, 0.1, 1, 1).unwrap();
        s.apply_update(&g, 0.1, 0, 0).unwrap();
        assert_eq!(verify_update_log(&s.log(), 0), Ok(2));
        s.snapshot(0, 0);
        assert!(verify_update_log(&s.log(), 0).is_err());
    }
}
