use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dataset::WINDOW_FRAMES;
use crate::error::{Error, Result};
use crate::models::{FusionInput, Predictor};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    /// Median wall-clock milliseconds per single-sample prediction.
    pub ms_per_sample: f64,
    /// Frames per second at that rate.
    pub fps: f64,
}

impl Timing {
    pub fn from_ms(ms_per_sample: f64) -> Self {
        Timing {
            ms_per_sample,
            fps: (WINDOW_FRAMES as f64 * 1000.0) / ms_per_sample,
        }
    }
}

/// Times `n_samples` single-sample predictions, cycling through `input`,
/// and reports the median.
pub fn speed_bench(model: &Predictor, input: &FusionInput, n_samples: usize) -> Result<Timing> {
    if input.is_empty() || n_samples == 0 {
        return Err(Error::Empty);
    }
    let singles: Vec<FusionInput> = (0..input.len().min(n_samples))
        .map(|i| input.select(&[i]))
        .collect();
    // warm caches and allocator
    for x in singles.iter().take(3) {
        model.predict(x)?;
    }
    let mut times = Vec::with_capacity(n_samples);
    for k in 0..n_samples {
        let x = &singles[k % singles.len()];
        let t = Instant::now();
        let p = model.predict(x)?;
        times.push(t.elapsed().as_secs_f64() * 1000.0);
        std::hint::black_box(p);
    }
    times.sort_by(f64::total_cmp);
    let mid = times.len() / 2;
    let median = if times.len() % 2 == 0 {
        (times[mid - 1] + times[mid]) / 2.0
    } else {
        times[mid]
    };
    // a timer tick of zero would make the rate infinite
    Ok(Timing::from_ms(median.max(1e-6)))
}
