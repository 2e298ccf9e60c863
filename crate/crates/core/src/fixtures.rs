//! Small reference instances used by tests, docs and the CLI.

use crate::model::{Candidate, DemandOrigin, Facility, Instance, Practice, Site, UncertaintyModel};
use alloc::vec;

/// One site `l1` (setup 2, up to 10 sessions), one practice `p1` (capacity 4)
/// and one origin `v1` with 30 steerable and 3 walk-in patients that
/// considers `p1` before `l1`. Session cost 1, session capacity 28.
pub fn tiny1() -> Instance {
    Instance {
        sites: vec![Site { id: "l1".into(), setup_cost: 2, session_cap: 10, coord: Default::default() }],
        practices: vec![Practice { id: "p1".into(), capacity: 4, coord: Default::default() }],
        origins: vec![DemandOrigin::new(
            "v1",
            30,
            3,
            vec![
                Candidate { facility: Facility::Practice(0), distance_m: 1000 },
                Candidate { facility: Facility::Site(0), distance_m: 2000 },
            ],
        )],
        session_cost: 1,
        session_capacity: 28,
        uncertainty: UncertaintyModel::Deterministic,
        setup_groups: vec![],
    }
}

/// [`tiny1`] with steerable demand in [25, 35] (budget 35) and walk-ins in
/// [2, 5] (budget 5). The practice cannot absorb 5 walk-ins, so both robust
/// counterparts are infeasible.
pub fn tiny1_unc() -> Instance {
    let mut inst = tiny1();
    inst.origins[0] = inst.origins[0].clone().with_bounds((25, 35), (2, 5));
    inst.uncertainty = UncertaintyModel::Budgeted { gamma_steerable: 35, gamma_walkin: 5 };
    inst
}

/// [`tiny1_unc`] with practice capacity 6, which makes both robust
/// counterparts feasible.
pub fn tiny1_unc_roomy() -> Instance {
    let mut inst = tiny1_unc();
    inst.practices[0].capacity = 6;
    inst
}
