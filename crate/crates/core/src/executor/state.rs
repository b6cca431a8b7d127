use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlanState {
    Draft,
    PendingApproval,
    Approved,
    Rejected,
    Executing,
    Completed,
    Failed,
}

impl PlanState {
    pub const ALL: [PlanState; 7] = [
        PlanState::Draft,
        PlanState::PendingApproval,
        PlanState::Approved,
        PlanState::Rejected,
        PlanState::Executing,
        PlanState::Completed,
        PlanState::Failed,
    ];

    /// The declared edges of the approval state machine.
    pub fn can_transition(self, to: PlanState) -> bool {
        use PlanState::*;
        matches!(
            (self, to),
            (Draft, PendingApproval)
                | (PendingApproval, Approved)
                | (PendingApproval, Rejected)
                | (Approved, Executing)
                | (Executing, Completed)
                | (Executing, Failed)
                | (Rejected, Draft)
        )
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, PlanState::Completed | PlanState::Failed)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn edge_count() {
        let edges = PlanState::ALL
            .iter()
            .flat_map(|a| PlanState::ALL.iter().map(move |b| (*a, *b)))
            .filter(|(a, b)| a.can_transition(*b))
            .count();
        assert_eq!(edges, 7);
        assert!(!PlanState::Draft.can_transition(PlanState::Approved));
        assert!(!PlanState::Rejected.can_transition(PlanState::Approved));
    }
}
