//! Compute dispatch execution.

use crate::command::DispatchCmd;
use crate::error::{GpuError, Result};
use crate::pipeline::apply_write_back;
use crate::shader::interp::Machine;
use crate::shader::IoBinding;

/// Invocations per interpreter batch.
const BATCH: usize = 4096;
const MAX_INVOCATIONS: u64 = 1 << 26;

pub(crate) fn execute_dispatch(cmd: &DispatchCmd) -> Result<()> {
    let p = &cmd.pipeline.inner;
    let stage = &p.stage;
    let wg = p.workgroup_size.map(|v| v.max(1));
    let groups = cmd.groups;
    let per_group = wg[0] as u64 * wg[1] as u64 * wg[2] as u64;
    let total = per_group * groups[0] as u64 * groups[1] as u64 * groups[2] as u64;
    if total == 0 {
        return Ok(());
    }
    if total > MAX_INVOCATIONS {
        return Err(GpuError::validation(
            "dispatch",
            format!("{total} invocations exceed the limit of {MAX_INVOCATIONS}"),
        ));
    }
    let (mut env, write_back) = stage.env(&cmd.bind_groups)?;
    let mut start = 0u64;
    while start < total {
        let lanes = (total - start).min(BATCH as u64) as usize;
        let mut args = stage.empty_args(lanes);
        for input in &stage.inputs {
            let arg = &mut args[input.arg];
            for l in 0..lanes {
                let flat = start + l as u64;
                let group = flat / per_group;
                let local = flat % per_group;
                let lid = [
                    (local % wg[0] as u64) as u32,
                    (local / wg[0] as u64 % wg[1] as u64) as u32,
                    (local / (wg[0] as u64 * wg[1] as u64)) as u32,
                ];
                let gid = [
                    (group % groups[0] as u64) as u32,
                    (group / groups[0] as u64 % groups[1] as u64) as u32,
                    (group / (groups[0] as u64 * groups[1] as u64)) as u32,
                ];
                let words = match input.binding {
                    IoBinding::GlobalInvocationId => {
                        [gid[0] * wg[0] + lid[0], gid[1] * wg[1] + lid[1], gid[2] * wg[2] + lid[2]]
                    }
                    IoBinding::LocalInvocationId => lid,
                    IoBinding::LocalInvocationIndex => [local as u32, 0, 0],
                    IoBinding::WorkGroupId => gid,
                    IoBinding::NumWorkGroups => groups,
                    _ => [0; 3],
                };
                for s in 0..input.slots.min(3) {
                    arg.data[(input.slot + s) * lanes + l] = words[s];
                }
            }
        }
        let mut machine = Machine::new(&stage.module, &mut env, lanes);
        machine.run_entry(stage.entry, args)?;
        start += lanes as u64;
    }
    apply_write_back(&mut env, write_back);
    Ok(())
}
