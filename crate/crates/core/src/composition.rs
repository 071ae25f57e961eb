//! Provider selection over a trust matrix and construction of the
//! composition path.
//!
//! Discovery produces a pile of service advertisements. This module scores
//! them into a matrix with one row per abstract service in the plan and one
//! column per candidate node, picks the most trusted provider per row, and
//! lays the chosen providers out as an execution path that starts and ends
//! at the initiator.

use std::collections::BTreeSet;
use std::fmt;

use crate::error::{Error, Result};
use crate::hammerstein::{
    trust_score, HammersteinModel, InputSpec, NormalizationContext, TrustScore,
};
use crate::qos::QosVector;
use crate::types::{ConcreteServiceId, NodeId, ServiceId, SimTime};

/// One provider's offer for one abstract service, as delivered by
/// discovery.
#[derive(Debug, Clone, PartialEq)]
pub struct ServiceAdvertisement {
    pub service: ServiceId,
    pub concrete: ConcreteServiceId,
    pub provider: NodeId,
    /// Node that authored the reply. Equal to `provider` for a node
    /// advertising itself, different for a repository answering on a
    /// neighbor's behalf.
    pub reported_by: NodeId,
    pub qos: QosVector,
    /// Route the reply travelled, initiator first, provider last.
    pub route: Vec<NodeId>,
    pub received_at: SimTime,
}

impl ServiceAdvertisement {
    /// Hops between initiator and provider along the discovery route.
    pub fn hop_count(&self) -> u32 {
        self.route.len().saturating_sub(1) as u32
    }
}

/// One scored matrix cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub trust: TrustScore,
    /// Index into the advertisement list the score came from; absent for
    /// matrices injected directly from raw values.
    pub ad_index: Option<usize>,
    pub received_at: SimTime,
}

/// Trust matrix: rows follow the plan order, columns are the candidate
/// nodes in ascending id order. A `None` cell means the node made no offer
/// for that abstract service.
#[derive(Debug, Clone, PartialEq)]
pub struct TrustMatrix {
    services: Vec<ServiceId>,
    nodes: Vec<NodeId>,
    cells: Vec<Vec<Option<Cell>>>,
}

impl TrustMatrix {
    /// Score advertisements into a matrix. Normalization is per row: each
    /// abstract service's candidates are min-max scaled against each other
    /// only. A node offering several matches for one row keeps its best
    /// score. Hop counts are taken from the advertisement routes,
    /// superseding any caller-set value. `noise` is drawn once per scored
    /// advertisement; pass `|| 0.0` for deterministic scoring.
    pub fn from_advertisements<F: FnMut() -> f64>(
        plan: &[ServiceId],
        ads: &[ServiceAdvertisement],
        spec: &InputSpec,
        model: &HammersteinModel,
        mut noise: F,
    ) -> Result<TrustMatrix> {
        if plan.is_empty() {
            return Err(Error::invalid(
                "plan must name at least one abstract service",
            ));
        }
        model.validate()?;
        let nodes: Vec<NodeId> = ads
            .iter()
            .map(|ad| ad.provider)
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        let mut cells = Vec::with_capacity(plan.len());
        for service in plan {
            let row_ads: Vec<(usize, QosVector)> = ads
                .iter()
                .enumerate()
                .filter(|(_, ad)| ad.service == *service)
                .map(|(i, ad)| {
                    let mut qos = ad.qos;
                    qos.hop_count = Some(ad.hop_count());
                    (i, qos)
                })
                .collect();
            let mut row: Vec<Option<Cell>> = vec![None; nodes.len()];
            if row_ads.is_empty() {
                cells.push(row);
                continue;
            }
            let candidates: Vec<QosVector> = row_ads.iter().map(|(_, q)| *q).collect();
            let ctx = NormalizationContext::build(&candidates, spec)?;
            for (i, qos) in &row_ads {
                let ad = &ads[*i];
                let trust = trust_score(qos, &ctx, model, noise())?;
                let col = nodes
                    .binary_search(&ad.provider)
                    .expect("provider is a column");
                let replace = match &row[col] {
                    None => true,
                    Some(prev) => {
                        trust.value() > prev.trust.value()
                            || (trust.value() == prev.trust.value()
                                && ad.received_at < prev.received_at)
                    }
                };
                if replace {
                    row[col] = Some(Cell {
                        trust,
                        ad_index: Some(*i),
                        received_at: ad.received_at,
                    });
                }
            }
            cells.push(row);
        }
        Ok(TrustMatrix {
            services: plan.to_vec(),
            nodes,
            cells,
        })
    }

    /// Build a matrix from raw trust values, `None` marking the absence of
    /// an offer. Rows follow `services`, columns follow `nodes`.
    pub fn from_rows(
        services: Vec<ServiceId>,
        nodes: Vec<NodeId>,
        rows: Vec<Vec<Option<f64>>>,
    ) -> Result<TrustMatrix> {
        if rows.len() != services.len() {
            return Err(Error::invalid(format!(
                "{} rows for {} services",
                rows.len(),
                services.len()
            )));
        }
        let cells = rows
            .into_iter()
            .map(|row| {
                if row.len() != nodes.len() {
                    return Err(Error::invalid(format!(
                        "row has {} cells for {} nodes",
                        row.len(),
                        nodes.len()
                    )));
                }
                Ok(row
                    .into_iter()
                    .map(|v| {
                        v.map(|t| Cell {
                            trust: TrustScore::clamped(t),
                            ad_index: None,
                            received_at: 0.0,
                        })
                    })
                    .collect())
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(TrustMatrix {
            services,
            nodes,
            cells,
        })
    }

    pub fn services(&self) -> &[ServiceId] {
        &self.services
    }

    pub fn nodes(&self) -> &[NodeId] {
        &self.nodes
    }

    pub fn cell(&self, row: usize, col: usize) -> Option<&Cell> {
        self.cells
            .get(row)
            .and_then(|r| r.get(col))
            .and_then(|c| c.as_ref())
    }

    /// Compact single-line encoding: `services|nodes|rows`, rows separated
    /// by `;`, cells by `,`, absence written as `-`. Only the trust values
    /// survive a round trip.
    pub fn encode(&self) -> String {
        let services = self
            .services
            .iter()
            .map(|s| s.0.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let nodes = self
            .nodes
            .iter()
            .map(|n| n.0.to_string())
            .collect::<Vec<_>>()
            .join(",");
        let rows = self
            .cells
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| match c {
                        Some(cell) => cell.trust.value().to_string(),
                        None => "-".to_string(),
                    })
                    .collect::<Vec<_>>()
                    .join(",")
            })
            .collect::<Vec<_>>()
            .join(";");
        format!("{services}|{nodes}|{rows}")
    }

    pub fn decode(text: &str) -> Result<TrustMatrix> {
        let mut parts = text.splitn(3, '|');
        let (services, nodes, rows) = match (parts.next(), parts.next(), parts.next()) {
            (Some(s), Some(n), Some(r)) => (s, n, r),
            _ => return Err(Error::invalid(format!("malformed matrix encoding: {text}"))),
        };
        let parse_ids = |s: &str| -> Result<Vec<u32>> {
            if s.is_empty() {
                return Ok(Vec::new());
            }
            s.split(',')
                .map(|t| {
                    t.parse::<u32>()
                        .map_err(|_| Error::invalid(format!("bad id in matrix encoding: {t}")))
                })
                .collect()
        };
        let services: Vec<ServiceId> = parse_ids(services)?.into_iter().map(ServiceId).collect();
        let nodes: Vec<NodeId> = parse_ids(nodes)?.into_iter().map(NodeId).collect();
        let mut parsed_rows = Vec::new();
        if !rows.is_empty() {
            for row in rows.split(';') {
                let cells = row
                    .split(',')
                    .map(|cell| {
                        if cell == "-" {
                            Ok(None)
                        } else {
                            cell.parse::<f64>().map(Some).map_err(|_| {
                                Error::invalid(format!(
                                    "bad trust value in matrix encoding: {cell}"
                                ))
                            })
                        }
                    })
                    .collect::<Result<Vec<_>>>()?;
                parsed_rows.push(cells);
            }
        }
        TrustMatrix::from_rows(services, nodes, parsed_rows)
    }
}

impl fmt::Display for TrustMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let headers: Vec<String> = self.nodes.iter().map(|n| n.to_string()).collect();
        let mut rows: Vec<(String, Vec<String>)> = Vec::new();
        for (i, s) in self.services.iter().enumerate() {
            let cells = self.cells[i]
                .iter()
                .map(|c| match c {
                    Some(cell) => format!("{:.1}", cell.trust.value()),
                    None => "-".to_string(),
                })
                .collect();
            rows.push((s.to_string(), cells));
        }
        let label_w = rows.iter().map(|(l, _)| l.len()).max().unwrap_or(0);
        let mut col_w: Vec<usize> = headers.iter().map(|h| h.len()).collect();
        for (_, cells) in &rows {
            for (w, c) in col_w.iter_mut().zip(cells) {
                *w = (*w).max(c.len());
            }
        }
        write!(f, "{:label_w$}", "")?;
        for (h, w) in headers.iter().zip(&col_w) {
            write!(f, "  {h:>w$}")?;
        }
        for (label, cells) in &rows {
            write!(f, "\n{label:label_w$}")?;
            for (c, w) in cells.iter().zip(&col_w) {
                write!(f, "  {c:>w$}")?;
            }
        }
        Ok(())
    }
}

/// Selected provider for one plan position.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProviderChoice {
    pub service: ServiceId,
    pub node: NodeId,
    pub trust: TrustScore,
    pub ad_index: Option<usize>,
}

/// Pick the most trusted provider per row. Ties break toward the earlier
/// received advertisement, then toward the earlier matrix column (lower
/// node id under the canonical column order). A row with no offers at all
/// fails with [`Error::NoProvider`] naming the service.
pub fn select_providers(matrix: &TrustMatrix) -> Result<Vec<ProviderChoice>> {
    let mut choices = Vec::with_capacity(matrix.services.len());
    for (row, service) in matrix.services.iter().enumerate() {
        let mut best: Option<(usize, &Cell)> = None;
        for (col, cell) in matrix.cells[row].iter().enumerate() {
            let Some(cell) = cell else { continue };
            let better = match best {
                None => true,
                Some((_, b)) => {
                    cell.trust.value() > b.trust.value()
                        || (cell.trust.value() == b.trust.value()
                            && cell.received_at < b.received_at)
                }
            };
            if better {
                best = Some((col, cell));
            }
        }
        let (col, cell) = best.ok_or(Error::NoProvider { service: *service })?;
        choices.push(ProviderChoice {
            service: *service,
            node: matrix.nodes[col],
            trust: cell.trust,
            ad_index: cell.ad_index,
        });
    }
    Ok(choices)
}

/// The node visit order of the chosen providers, one entry per plan
/// position. Repeat visits are kept; the path is a sequence, not a set.
pub fn composition_path(choices: &[ProviderChoice]) -> Vec<NodeId> {
    choices.iter().map(|c| c.node).collect()
}

/// One message of the execution walk.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ExecutionLeg {
    pub from: NodeId,
    pub to: NodeId,
    /// Plan position the message feeds; `None` for the final result leg
    /// back to the initiator.
    pub stage: Option<usize>,
}

/// Lay the path out as messages: initiator to the first provider, provider
/// to provider along the path, and the last provider back to the
/// initiator. A path of k stages yields k + 1 legs.
pub fn execution_legs(initiator: NodeId, path: &[NodeId]) -> Vec<ExecutionLeg> {
    let mut legs = Vec::with_capacity(path.len() + 1);
    let mut from = initiator;
    for (stage, node) in path.iter().enumerate() {
        legs.push(ExecutionLeg {
            from,
            to: *node,
            stage: Some(stage),
        });
        from = *node;
    }
    if !path.is_empty() {
        legs.push(ExecutionLeg {
            from,
            to: initiator,
            stage: None,
        });
    }
    legs
}

/// Join two discovery routes that share the initiator as their first
/// entry into a walk from the end of `a` to the end of `b`, trimmed at
/// their common prefix. Joining a route with itself yields the single
/// shared endpoint (a local handoff).
pub fn join_routes(a: &[NodeId], b: &[NodeId]) -> Result<Vec<NodeId>> {
    if a.is_empty() || b.is_empty() {
        return Err(Error::invalid("routes must not be empty"));
    }
    if a[0] != b[0] {
        return Err(Error::invalid(format!(
            "routes must share their origin, got {} and {}",
            a[0], b[0]
        )));
    }
    let mut junction = 0;
    while junction + 1 < a.len() && junction + 1 < b.len() && a[junction + 1] == b[junction + 1] {
        junction += 1;
    }
    let mut walk: Vec<NodeId> = a[junction..].iter().rev().copied().collect();
    walk.extend_from_slice(&b[junction + 1..]);
    Ok(walk)
}
