use crate::error::{Error, Result};

/// Kaplan-Meier estimate of the censoring survival function, returned as
/// `(time, G(time))` steps at each distinct censoring time. Events are
/// treated as occurring before censorings at the same time.
pub fn censoring_survival(times: &[f64], censored: &[bool]) -> Vec<(f64, f64)> {
    let mut order: Vec<usize> = (0..times.len()).collect();
    order.sort_by(|&a, &b| times[a].total_cmp(&times[b]));
    let mut steps = Vec::new();
    let mut g = 1.0;
    let mut at_risk = times.len();
    let mut k = 0;
    while k < order.len() {
        let t = times[order[k]];
        let mut leaving = 0;
        let mut cens = 0;
        while k < order.len() && times[order[k]] == t {
            leaving += 1;
            cens += usize::from(censored[order[k]]);
            k += 1;
        }
        if cens > 0 {
            g *= 1.0 - cens as f64 / at_risk as f64;
            steps.push((t, g));
        }
        at_risk -= leaving;
    }
    steps
}

/// Left limit `G(s-)`: product over censoring times strictly before `s`.
fn left_limit(steps: &[(f64, f64)], s: f64) -> f64 {
    steps.iter().take_while(|(t, _)| *t < s).last().map_or(1.0, |&(_, g)| g)
}

/// Inverse-probability-of-censoring weights for a `horizon`-year outcome.
///
/// Subject `i` is followed to `times[i]`, where it either has the event, is
/// censored, or (neither flag) ends follow-up with a known event-free
/// outcome. Subjects whose outcome by the horizon is known get
/// `1 / G(min(horizon, time)-)`; those censored before the horizon get
/// weight 0 but still inform `G`.
pub fn ipcw_weights(times: &[f64], events: &[bool], censored: &[bool], horizon: f64) -> Result<Vec<f64>> {
    if times.len() != events.len() || times.len() != censored.len() {
        return Err(Error::Shape {
            expected: times.len(),
            got: events.len().min(censored.len()),
        });
    }
    if let Some(i) = (0..times.len()).find(|&i| events[i] && censored[i]) {
        return Err(Error::Config(format!(
            "subject {i} is flagged both as event and censored"
        )));
    }
    if times.iter().any(|&t| !(t >= 0.0)) {
        return Err(Error::Config("follow-up times must be non-negative".into()));
    }
    let steps = censoring_survival(times, censored);
    let mut out = Vec::with_capacity(times.len());
    for i in 0..times.len() {
        let t = times[i];
        let known = !censored[i] || t >= horizon;
        if !known {
            out.push(0.0);
            continue;
        }
        let s = t.min(horizon);
        let g = left_limit(&steps, s);
        if g <= 0.0 {
            return Err(Error::ZeroCensoringSurvival { time: s });
        }
        out.push(1.0 / g);
    }
    Ok(out)
}
