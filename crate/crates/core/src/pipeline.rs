//! Audio to per-frame LPC analysis, and on to chain features.

use crate::audio::AudioSignal;
use crate::error::Result;
use crate::features::{apply_chain, FeatureMatrix, FrameAnalysis, ParamChain};
use crate::frontend::{
    autocorrelate, decimate_to_8khz, drop_low_energy, frame_and_window, levinson_durbin,
    lpc_to_cepstrum, preemphasize, ENERGY_FLOOR_DB, FRAME_LEN, FRAME_OVERLAP, LPC_ORDER,
    PREEMPHASIS,
};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrontendConfig {
    pub order: usize,
    pub preemphasis: f64,
    pub frame_len: usize,
    pub overlap: f64,
    pub energy_floor_db: f64,
}

impl Default for FrontendConfig {
    fn default() -> Self {
        Self {
            order: LPC_ORDER,
            preemphasis: PREEMPHASIS,
            frame_len: FRAME_LEN,
            overlap: FRAME_OVERLAP,
            energy_floor_db: ENERGY_FLOOR_DB,
        }
    }
}

/// Decimate, pre-emphasize, frame, drop quiet frames, then LPC and LPCC per
/// frame. Downsampling happens before pre-emphasis.
pub fn analyze(signal: &AudioSignal, cfg: &FrontendConfig) -> Result<Vec<FrameAnalysis>> {
    let narrow = decimate_to_8khz(signal)?;
    let emphasized = preemphasize(&narrow, cfg.preemphasis)?;
    let frames = frame_and_window(&emphasized, cfg.frame_len, cfg.overlap)?;
    let frames = drop_low_energy(frames, cfg.energy_floor_db)?;
    frames
        .iter()
        .map(|f| {
            let r = autocorrelate(&f.samples, cfg.order)?;
            let lpc = levinson_durbin(&r, cfg.order)?;
            let cepstrum = lpc_to_cepstrum(&lpc.coeffs, cfg.order);
            Ok(FrameAnalysis { lpc, cepstrum })
        })
        .collect()
}

pub fn extract(signal: &AudioSignal, chain: &ParamChain, cfg: &FrontendConfig) -> Result<FeatureMatrix> {
    apply_chain(&analyze(signal, cfg)?, chain)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;

    #[test]
    fn silent_signal_is_named() {
        let s = AudioSignal::new(vec![0.0; 4000], 8000).unwrap();
        assert!(matches!(
            analyze(&s, &FrontendConfig::default()),
            Err(Error::SilentUtterance)
        ));
    }

    #[test]
    fn noise_gives_order_p_frames() {
        let mut state = 12345u64;
        let x: Vec<f64> = (0..8000)
            .map(|_| {
                state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
            })
            .collect();
        let s = AudioSignal::new(x, 8000).unwrap();
        let frames = analyze(&s, &FrontendConfig::default()).unwrap();
        assert_eq!(frames.len(), 98);
        assert!(frames.iter().all(|f| f.cepstrum.len() == 20 && f.lpc.prediction_error > 0.0));
        let f = extract(&s, &"CMS+ACW".parse().unwrap(), &FrontendConfig::default()).unwrap();
        assert_eq!((f.frames(), f.dim()), (98, 20));
    }
}
