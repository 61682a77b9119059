//! ξ-steepness cluster extraction over an OPTICS reachability plot.
//!
//! Steep-down and steep-up areas are paired into candidate clusters with the
//! usual end-point corrections and predecessor correction; the final labeling
//! keeps the innermost clusters, so the number of clusters is emergent.

use super::optics::{ClusterAssignment, ClusterLabel};

struct SteepDown {
    start: usize,
    end: usize,
    mib: f64,
}

/// Grow a steep area from `start`, tolerating at most `min_samples`
/// consecutive non-steep points that still move in the same direction.
fn extend_region(steep: &[bool], xward: &[bool], start: usize, min_samples: usize) -> usize {
    let mut non_xward = 0;
    let mut end = start;
    for i in start..steep.len() {
        if steep[i] {
            non_xward = 0;
            end = i;
        } else if !xward[i] {
            non_xward += 1;
            if non_xward > min_samples {
                break;
            }
        } else {
            return end;
        }
    }
    end
}

fn update_filter_sdas(sdas: &mut Vec<SteepDown>, mib: f64, xi_complement: f64, plot: &[f64]) {
    if mib.is_infinite() {
        sdas.clear();
        return;
    }
    sdas.retain(|d| mib <= plot[d.start] * xi_complement);
    for d in sdas.iter_mut() {
        d.mib = d.mib.max(mib);
    }
}

fn correct_predecessor(
    plot: &[f64],
    pred_plot: &[Option<usize>],
    ordering: &[usize],
    s: usize,
    mut e: usize,
) -> Option<(usize, usize)> {
    while s < e {
        if plot[s] > plot[e] {
            return Some((s, e));
        }
        if let Some(p) = pred_plot[e] {
            if ordering[s..e].contains(&p) {
                return Some((s, e));
            }
        }
        e -= 1;
    }
    None
}

fn xi_clusters(
    reach_plot: &[f64],
    pred_plot: &[Option<usize>],
    ordering: &[usize],
    xi: f64,
    min_samples: usize,
    min_cluster_size: usize,
) -> Vec<(usize, usize)> {
    let n = reach_plot.len();
    // sentinel: the plot ends on an infinite climb
    let mut plot = reach_plot.to_vec();
    plot.push(f64::INFINITY);
    let xi_complement = 1.0 - xi;

    let ratio: Vec<f64> = (0..n).map(|i| plot[i] / plot[i + 1]).collect();
    let steep_up: Vec<bool> = ratio.iter().map(|&r| r <= xi_complement).collect();
    let steep_down: Vec<bool> = ratio.iter().map(|&r| r >= 1.0 / xi_complement).collect();
    let down: Vec<bool> = ratio.iter().map(|&r| r > 1.0).collect();
    let up: Vec<bool> = ratio.iter().map(|&r| r < 1.0).collect();

    let mut sdas: Vec<SteepDown> = Vec::new();
    let mut clusters = Vec::new();
    let mut index = 0usize;
    let mut mib = 0.0f64;

    for steep_index in (0..n).filter(|&i| steep_up[i] || steep_down[i]) {
        if steep_index < index {
            continue;
        }
        mib = plot[index..=steep_index].iter().fold(mib, |m, &v| m.max(v));

        if steep_down[steep_index] {
            update_filter_sdas(&mut sdas, mib, xi_complement, &plot);
            let end = extend_region(&steep_down, &up, steep_index, min_samples);
            sdas.push(SteepDown {
                start: steep_index,
                end,
                mib: 0.0,
            });
            index = end + 1;
            mib = plot[index];
        } else {
            update_filter_sdas(&mut sdas, mib, xi_complement, &plot);
            let u_start = steep_index;
            let u_end = extend_region(&steep_up, &down, u_start, min_samples);
            index = u_end + 1;
            mib = plot[index];

            let mut found = Vec::new();
            for d in &sdas {
                let mut c_start = d.start;
                let mut c_end = u_end;

                if plot[c_end + 1] * xi_complement < d.mib {
                    continue;
                }

                let d_max = plot[d.start];
                if d_max * xi_complement >= plot[c_end + 1] {
                    while plot[c_start + 1] > plot[c_end + 1] && c_start < d.end {
                        c_start += 1;
                    }
                } else if plot[c_end + 1] * xi_complement >= d_max {
                    while plot[c_end - 1] > d_max && c_end > u_start {
                        c_end -= 1;
                    }
                }

                let Some((s, e)) = correct_predecessor(&plot, pred_plot, ordering, c_start, c_end)
                else {
                    continue;
                };
                if e - s + 1 < min_cluster_size || s > d.end || e < u_start {
                    continue;
                }
                found.push((s, e));
            }
            // inner clusters first
            found.reverse();
            clusters.extend(found);
        }
    }
    clusters
}

/// Per-point labels (indexed like the snapshot) from ξ extraction.
/// Minimum cluster size equals `min_samples`.
pub fn extract_clusters(assignment: &ClusterAssignment, xi: f64) -> Vec<ClusterLabel> {
    let ordering = &assignment.ordering;
    let n = ordering.len();
    let plot: Vec<f64> = ordering
        .iter()
        .map(|&i| assignment.reachability[i].unwrap_or(f64::INFINITY))
        .collect();
    let pred_plot: Vec<Option<usize>> = ordering.iter().map(|&i| assignment.predecessor[i]).collect();
    let clusters = xi_clusters(
        &plot,
        &pred_plot,
        ordering,
        xi,
        assignment.min_samples,
        assignment.min_samples,
    );

    let mut by_position: Vec<Option<u32>> = vec![None; n];
    let mut next = 0u32;
    for (s, e) in clusters {
        if by_position[s..=e].iter().all(Option::is_none) {
            by_position[s..=e].fill(Some(next));
            next += 1;
        }
    }
    let mut labels = vec![ClusterLabel::Noise; n];
    for (pos, &i) in ordering.iter().enumerate() {
        if let Some(c) = by_position[pos] {
            labels[i] = ClusterLabel::Cluster(c);
        }
    }
    labels
}
