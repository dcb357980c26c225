use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::hash::Hash;
use std::ops::Range;
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PartitionError {
    #[error("submodel {submodel}: empty hour range in period {period}")]
    EmptyRange { submodel: usize, period: usize },
    #[error("submodel {submodel}, period {period}: weight {weight} differs from its {hours} hours")]
    WeightMismatch {
        submodel: usize,
        period: usize,
        weight: usize,
        hours: usize,
    },
    #[error("hour {0} lies outside the horizon")]
    OutOfHorizon(usize),
    #[error("hour {0} is covered more than once")]
    Overlap(usize),
    #[error("hour {0} is not covered")]
    Gap(usize),
    #[error("submodel {0} is unlinked but has more than one period")]
    UnlinkedNotSingle(usize),
    #[error("submodel {submodel} is linked but period {period} is not chronologically adjacent")]
    LinkedNotContiguous { submodel: usize, period: usize },
    #[error("submodel {0} has no periods")]
    EmptySubmodel(usize),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubmodelKind {
    Unlinked,
    Linked,
}

/// One weighted representative period and the source hours it stands for.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RepPeriod {
    pub hours: Vec<Range<usize>>,
    pub weight: usize,
}

impl RepPeriod {
    pub fn contiguous(hours: Range<usize>) -> Self {
        let weight = hours.len();
        RepPeriod {
            hours: vec![hours],
            weight,
        }
    }

    pub fn first_hour(&self) -> usize {
        self.hours[0].start
    }

    pub fn iter_hours(&self) -> impl Iterator<Item = usize> + '_ {
        self.hours.iter().flat_map(|r| r.clone())
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Submodel {
    pub kind: SubmodelKind,
    pub periods: Vec<RepPeriod>,
}

impl Submodel {
    pub fn hours(&self) -> usize {
        self.periods.iter().map(|p| p.weight).sum()
    }

    pub fn first_hour(&self) -> usize {
        self.periods[0].first_hour()
    }

    /// Contiguous hour span of a linked submodel.
    pub fn span(&self) -> Range<usize> {
        let start = self.first_hour();
        start..start + self.hours()
    }
}

/// Ordered submodels of weighted representative periods covering a horizon.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Partition {
    pub horizon: usize,
    pub submodels: Vec<Submodel>,
}

impl Partition {
    /// One linked submodel with one period per hour.
    pub fn identity(horizon: usize) -> Self {
        Partition {
            horizon,
            submodels: vec![Submodel {
                kind: SubmodelKind::Linked,
                periods: (0..horizon).map(|h| RepPeriod::contiguous(h..h + 1)).collect(),
            }],
        }
    }

    /// One linked submodel whose consecutive periods have the given sizes.
    pub fn single_linked(horizon: usize, sizes: &[usize]) -> Self {
        let mut start = 0;
        let periods = sizes
            .iter()
            .map(|&s| {
                let p = RepPeriod::contiguous(start..start + s);
                start += s;
                p
            })
            .collect();
        Partition {
            horizon,
            submodels: vec![Submodel {
                kind: SubmodelKind::Linked,
                periods,
            }],
        }
    }

    pub fn validate(&self, horizon: usize) -> Result<(), PartitionError> {
        let mut seen = vec![false; horizon];
        for (si, sub) in self.submodels.iter().enumerate() {
            if sub.periods.is_empty() {
                return Err(PartitionError::EmptySubmodel(si));
            }
            if sub.kind == SubmodelKind::Unlinked && sub.periods.len() != 1 {
                return Err(PartitionError::UnlinkedNotSingle(si));
            }
            let mut prev_end = None;
            for (pi, p) in sub.periods.iter().enumerate() {
                let hours: usize = p.hours.iter().map(|r| r.len()).sum();
                if p.hours.is_empty() || p.hours.iter().any(|r| r.is_empty()) {
                    return Err(PartitionError::EmptyRange { submodel: si, period: pi });
                }
                if hours != p.weight {
                    return Err(PartitionError::WeightMismatch {
                        submodel: si,
                        period: pi,
                        weight: p.weight,
                        hours,
                    });
                }
                if sub.kind == SubmodelKind::Linked {
                    let adjacent = p.hours.len() == 1 && prev_end.is_none_or(|e| e == p.hours[0].start);
                    if !adjacent {
                        return Err(PartitionError::LinkedNotContiguous { submodel: si, period: pi });
                    }
                    prev_end = Some(p.hours[0].end);
                }
                for h in p.iter_hours() {
                    match seen.get_mut(h) {
                        None => return Err(PartitionError::OutOfHorizon(h)),
                        Some(true) => return Err(PartitionError::Overlap(h)),
                        Some(s) => *s = true,
                    }
                }
            }
        }
        if let Some(h) = seen.iter().position(|s| !s) {
            return Err(PartitionError::Gap(h));
        }
        Ok(())
    }

    pub fn periods_total(&self) -> usize {
        self.submodels.iter().map(|s| s.periods.len()).sum()
    }

    pub fn count(&self, kind: SubmodelKind) -> usize {
        self.submodels.iter().filter(|s| s.kind == kind).count()
    }

    pub fn linked_lengths(&self) -> Vec<usize> {
        self.submodels
            .iter()
            .filter(|s| s.kind == SubmodelKind::Linked)
            .map(Submodel::hours)
            .collect()
    }

    /// Cut flags implied by the partition: hours covered by unlinked
    /// submodels.
    pub fn flags(&self) -> Vec<bool> {
        let mut flags = vec![false; self.horizon];
        for sub in self.submodels.iter().filter(|s| s.kind == SubmodelKind::Unlinked) {
            for h in sub.periods.iter().flat_map(|p| p.iter_hours()) {
                flags[h] = true;
            }
        }
        flags
    }

    pub fn save(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        let text = serde_json::to_string_pretty(self).map_err(std::io::Error::other)?;
        std::fs::write(path, text + "\n")
    }

    pub fn load(path: impl AsRef<Path>) -> std::io::Result<Self> {
        let text = std::fs::read_to_string(path)?;
        serde_json::from_str(&text).map_err(std::io::Error::other)
    }
}

/// Flagged hours become unlinked single-hour submodels; maximal unflagged runs
/// become linked submodels of unit-weight periods.
pub fn disaggregate(flags: &[bool]) -> Partition {
    let mut submodels = Vec::new();
    let mut h = 0;
    while h < flags.len() {
        if flags[h] {
            submodels.push(Submodel {
                kind: SubmodelKind::Unlinked,
                periods: vec![RepPeriod::contiguous(h..h + 1)],
            });
            h += 1;
        } else {
            let start = h;
            while h < flags.len() && !flags[h] {
                h += 1;
            }
            submodels.push(Submodel {
                kind: SubmodelKind::Linked,
                periods: (start..h).map(|t| RepPeriod::contiguous(t..t + 1)).collect(),
            });
        }
    }
    Partition {
        horizon: flags.len(),
        submodels,
    }
}

fn merge_ranges(mut ranges: Vec<Range<usize>>) -> Vec<Range<usize>> {
    ranges.sort_by_key(|r| r.start);
    let mut out: Vec<Range<usize>> = Vec::with_capacity(ranges.len());
    for r in ranges {
        match out.last_mut() {
            Some(last) if last.end == r.start => last.end = r.end,
            _ => out.push(r),
        }
    }
    out
}

/// Groups the unlinked submodels of `partition` by the signature of their
/// first hour. Each group becomes one unlinked submodel whose period spans
/// all member hours. Linked submodels are kept; the result is ordered by
/// first hour.
pub fn aggregate_unlinked<S: Eq + Hash>(partition: &Partition, signature_by_hour: &[S]) -> Partition {
    let mut index: HashMap<&S, usize> = HashMap::new();
    let mut groups: Vec<Vec<Range<usize>>> = Vec::new();
    let mut out = Vec::new();
    for sub in &partition.submodels {
        match sub.kind {
            SubmodelKind::Linked => out.push(sub.clone()),
            SubmodelKind::Unlinked => {
                let p = &sub.periods[0];
                let g = *index.entry(&signature_by_hour[p.first_hour()]).or_insert_with(|| {
                    groups.push(Vec::new());
                    groups.len() - 1
                });
                groups[g].extend(p.hours.iter().cloned());
            }
        }
    }
    for ranges in groups {
        let hours = merge_ranges(ranges);
        let weight = hours.iter().map(|r| r.len()).sum();
        out.push(Submodel {
            kind: SubmodelKind::Unlinked,
            periods: vec![RepPeriod { hours, weight }],
        });
    }
    out.sort_by_key(Submodel::first_hour);
    Partition {
        horizon: partition.horizon,
        submodels: out,
    }
}

/// Collapses maximal runs of consecutive periods whose first hours share a
/// signature into single periods.
pub fn aggregate_linked<S: Eq>(submodel: &Submodel, signature_by_hour: &[S]) -> Submodel {
    let mut periods: Vec<RepPeriod> = Vec::new();
    let mut run_sig: Option<&S> = None;
    for p in &submodel.periods {
        let sig = &signature_by_hour[p.first_hour()];
        match periods.last_mut() {
            Some(last) if run_sig == Some(sig) => {
                let r = &mut last.hours[0];
                r.end = p.hours[0].end;
                last.weight += p.weight;
            }
            _ => {
                periods.push(p.clone());
                run_sig = Some(sig);
            }
        }
    }
    Submodel {
        kind: submodel.kind,
        periods,
    }
}

/// Applies both aggregation steps.
pub fn aggregate<S: Eq + Hash>(partition: &Partition, signature_by_hour: &[S]) -> Partition {
    let mut p = aggregate_unlinked(partition, signature_by_hour);
    for sub in p.submodels.iter_mut().filter(|s| s.kind == SubmodelKind::Linked) {
        *sub = aggregate_linked(sub, signature_by_hour);
    }
    p
}

#[cfg(test)]
mod tests {
    use super::*;

    const T: bool = true;
    const F: bool = false;

    #[test]
    fn disaggregate_example() {
        let p = disaggregate(&[T, T, F, F, F, T]);
        p.validate(6).unwrap();
        assert_eq!(p.count(SubmodelKind::Unlinked), 3);
        assert_eq!(p.linked_lengths(), vec![3]);
        assert_eq!(p.submodels[2].span(), 2..5);
        assert_eq!(p.flags(), vec![T, T, F, F, F, T]);

        let all = disaggregate(&[F; 7]);
        assert_eq!(all, Partition::identity(7));
    }

    #[test]
    fn unlinked_grouping() {
        let p = disaggregate(&[T, T, T]);
        let sigs = ['A', 'A', 'B'];
        let agg = aggregate_unlinked(&p, &sigs);
        agg.validate(3).unwrap();
        let weights: Vec<usize> = agg.submodels.iter().map(|s| s.periods[0].weight).collect();
        assert_eq!(weights, vec![2, 1]);
        assert_eq!(agg.submodels[0].periods[0].hours, vec![0..2]);

        let distinct = aggregate_unlinked(&p, &['A', 'B', 'C']);
        assert_eq!(distinct, p);
    }

    #[test]
    fn unlinked_groups_span_the_horizon() {
        let p = disaggregate(&[T, F, T, F, T]);
        let agg = aggregate_unlinked(&p, &['A', 'x', 'A', 'y', 'A']);
        agg.validate(5).unwrap();
        assert_eq!(agg.submodels.len(), 3);
        assert_eq!(agg.submodels[0].periods[0].hours, vec![0..1, 2..3, 4..5]);
    }

    #[test]
    fn linked_run_length_encoding() {
        let sub = &Partition::identity(6).submodels[0];
        let agg = aggregate_linked(sub, &['A', 'A', 'B', 'B', 'B', 'A']);
        let spans: Vec<_> = agg.periods.iter().map(|p| (p.hours[0].clone(), p.weight)).collect();
        assert_eq!(spans, vec![(0..2, 2), (2..5, 3), (5..6, 1)]);

        let one = aggregate_linked(sub, &[0u8; 6]);
        assert_eq!(one.periods.len(), 1);
        assert_eq!(one.periods[0].weight, 6);
    }

    #[test]
    fn validation_errors() {
        let mut p = Partition::single_linked(4, &[2, 2]);
        assert_eq!(p.validate(5), Err(PartitionError::Gap(4)));
        p.submodels[0].periods[1].weight = 3;
        assert!(matches!(p.validate(4), Err(PartitionError::WeightMismatch { .. })));
        let mut q = Partition::single_linked(4, &[2, 2]);
        q.submodels[0].periods[1].hours = vec![1..3];
        assert!(matches!(q.validate(4), Err(PartitionError::LinkedNotContiguous { .. })));
    }

    #[test]
    fn json_roundtrip() {
        let p = aggregate(&disaggregate(&[T, F, F, T, F]), &[1, 2, 2, 1, 3]);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("partition.json");
        p.save(&path).unwrap();
        assert_eq!(Partition::load(&path).unwrap(), p);
    }
}
