//! Hard-transfer assignment heuristic: each requested subfile is sent to the
//! `N_F` strongest eRRHs of every requesting UE that do not cache it.

use crate::model::{CacheState, ChannelRealization, FronthaulAssignment, RequestProfile};

pub fn assign_fronthaul_nf(
    channel: &ChannelRealization,
    cache: &CacheState,
    requests: &RequestProfile,
    n_f: usize,
) -> FronthaulAssignment {
    let (num_files, num_subfiles, num_errh) = cache.cached.dims();
    let mut assign = FronthaulAssignment::none(num_files, num_subfiles, num_errh);
    for k in 0..requests.num_ue() {
        let f = requests.file_of(k);
        for l in 0..num_subfiles {
            let mut candidates: Vec<usize> = (0..num_errh).filter(|&i| !cache.is_cached(f, l, i)).collect();
            candidates.sort_by(|&a, &b| channel.gain(k, b).total_cmp(&channel.gain(k, a)).then(a.cmp(&b)));
            for &i in candidates.iter().take(n_f) {
                assign.transfer.set(f, l, i, true);
            }
        }
    }
    assign
}
