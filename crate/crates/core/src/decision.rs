//! Ternary normal/fault decision from a prediction set.

use crate::domain::{Decision, LabelSpace};
use crate::error::{Error, Result};

/// Applies the decision rules in order:
///
/// 1. `Normal` if the set meets the normal labels and holds nothing else;
/// 2. `Faulty` if the set meets the fault labels;
/// 3. `Ambiguous` otherwise.
///
/// Because a [`LabelSpace`] is an exact partition, `Ambiguous` happens only
/// for the empty set.
pub fn classify(set_members: &[usize], space: &LabelSpace) -> Result<Decision> {
    if let Some(&bad) = set_members.iter().find(|&&i| i >= space.len()) {
        return Err(Error::UnknownLabel {
            label: format!("#{bad}"),
            line: None,
        });
    }
    let meets_normal = set_members.iter().any(|&i| space.is_normal(i));
    let within_normal = set_members.iter().all(|&i| space.is_normal(i));
    let meets_fault = set_members.iter().any(|&i| !space.is_normal(i));
    Ok(if meets_normal && within_normal {
        Decision::Normal
    } else if meets_fault {
        Decision::Faulty
    } else {
        Decision::Ambiguous
    })
}

/// [`classify`] for a set given by label names.
pub fn classify_names<S: AsRef<str>>(set_members: &[S], space: &LabelSpace) -> Result<Decision> {
    let idx = set_members
        .iter()
        .map(|l| space.require_index(l.as_ref()))
        .collect::<Result<Vec<_>>>()?;
    classify(&idx, space)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn bearing() -> LabelSpace {
        LabelSpace::with_normal(&["Normal", "IR", "OR", "Ball"], &["Normal"]).unwrap()
    }

    #[test]
    fn worked_examples() {
        let s = bearing();
        assert_eq!(classify_names(&["Normal"], &s).unwrap(), Decision::Normal);
        assert_eq!(classify_names(&["Normal", "IR"], &s).unwrap(), Decision::Faulty);
        assert_eq!(classify_names::<&str>(&[], &s).unwrap(), Decision::Ambiguous);
        assert_eq!(classify_names(&["IR", "OR"], &s).unwrap(), Decision::Faulty);
        assert!(matches!(
            classify_names(&["Cage"], &s),
            Err(Error::UnknownLabel { .. })
        ));
        assert!(classify(&[4], &s).is_err());
    }

    #[test]
    fn several_normal_labels() {
        let s = LabelSpace::with_normal(&["Idle", "Run", "Fault"], &["Idle", "Run"]).unwrap();
        assert_eq!(classify(&[0, 1], &s).unwrap(), Decision::Normal);
        assert_eq!(classify(&[1, 2], &s).unwrap(), Decision::Faulty);
        assert_eq!(classify(&[2], &s).unwrap(), Decision::Faulty);
    }

    fn subsets(n: usize) -> impl Iterator<Item = Vec<usize>> {
        (0u32..1 << n).map(move |mask| (0..n).filter(|i| mask & (1 << i) != 0).collect())
    }

    #[test]
    fn ambiguous_iff_empty_for_all_small_spaces() {
        for n in 2..=5 {
            let labels: Vec<String> = (0..n).map(|i| format!("L{i}")).collect();
            for normal_mask in 1u32..(1 << n) - 1 {
                let normal: Vec<String> = (0..n)
                    .filter(|i| normal_mask & (1 << i) != 0)
                    .map(|i| labels[i].clone())
                    .collect();
                let s = LabelSpace::with_normal(&labels, &normal).unwrap();
                for set in subsets(n) {
                    let d = classify(&set, &s).unwrap();
                    assert_eq!(d == Decision::Ambiguous, set.is_empty());
                }
            }
        }
    }

    #[test]
    fn adding_fault_label_never_clears_alarm() {
        let s = bearing();
        for set in subsets(4) {
            if classify(&set, &s).unwrap() != Decision::Faulty {
                continue;
            }
            for f in 1..4 {
                let mut bigger = set.clone();
                if !bigger.contains(&f) {
                    bigger.push(f);
                    bigger.sort_unstable();
                }
                assert_eq!(classify(&bigger, &s).unwrap(), Decision::Faulty);
            }
        }
    }
}
