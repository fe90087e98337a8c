use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Which branches exist and which one produces the returned image.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BranchMode {
    /// Both branches, bidirectional interaction, fused SR output.
    Full,
    /// Thermal branch alone.
    OnlySr,
    /// Optical branch alone, output from the modality-conversion head.
    OnlyMc,
    /// Both branches, optical guides thermal only, fused SR output.
    GuidedSr,
    /// Both branches, thermal guides optical only, output from the MC head.
    GuidedMc,
}

impl BranchMode {
    pub const ALL: [BranchMode; 5] =
        [BranchMode::Full, BranchMode::OnlySr, BranchMode::OnlyMc, BranchMode::GuidedSr, BranchMode::GuidedMc];

    pub fn has_thermal(self) -> bool {
        self != BranchMode::OnlyMc
    }

    pub fn has_optical(self) -> bool {
        self != BranchMode::OnlySr
    }

    /// Optical context flows into the thermal branch.
    pub fn guides_thermal(self) -> bool {
        matches!(self, BranchMode::Full | BranchMode::GuidedSr)
    }

    /// Thermal context flows into the optical branch.
    pub fn guides_optical(self) -> bool {
        matches!(self, BranchMode::Full | BranchMode::GuidedMc)
    }

    /// The returned image comes from the fused SR head (else the MC head).
    pub fn sr_head_output(self) -> bool {
        matches!(self, BranchMode::Full | BranchMode::OnlySr | BranchMode::GuidedSr)
    }

    pub fn has_mc_head(self) -> bool {
        matches!(self, BranchMode::Full | BranchMode::OnlyMc | BranchMode::GuidedMc)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            BranchMode::Full => "full",
            BranchMode::OnlySr => "only_sr",
            BranchMode::OnlyMc => "only_mc",
            BranchMode::GuidedSr => "guided_sr",
            BranchMode::GuidedMc => "guided_mc",
        }
    }
}

impl fmt::Display for BranchMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for BranchMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        BranchMode::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown branch mode '{s}'")))
    }
}

/// Architecture hyperparameters and ablation switches.
#[derive(Clone, Debug, PartialEq)]
pub struct ModelConfig {
    pub scale: usize,
    pub stages: usize,
    pub htl_depth: usize,
    pub channels: usize,
    pub heads: usize,
    pub window: usize,
    pub kernel: usize,
    pub lambda_t: f64,
    pub lambda_o: f64,
    pub use_crme: bool,
    pub use_pdtm: bool,
    pub branch_mode: BranchMode,
    /// Add the bicubic-upsampled thermal input to the reconstruction.
    pub bicubic_skip: bool,
    /// Standard deviation of the truncated-normal projection init.
    pub init_std: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            scale: 4,
            stages: 4,
            htl_depth: 6,
            channels: 96,
            heads: 6,
            window: 8,
            kernel: 3,
            lambda_t: 0.5,
            lambda_o: 0.5,
            use_crme: true,
            use_pdtm: true,
            branch_mode: BranchMode::Full,
            bicubic_skip: true,
            init_std: 0.02,
        }
    }
}

impl ModelConfig {
    /// Smallest configuration that still exercises every component.
    pub fn tiny() -> Self {
        Self { stages: 1, htl_depth: 1, channels: 8, heads: 2, window: 4, ..Self::default() }
    }

    /// Reduced configuration for CPU-scale training runs.
    pub fn desk() -> Self {
        Self { stages: 2, htl_depth: 2, channels: 32, heads: 4, window: 8, ..Self::default() }
    }

    pub fn head_dim(&self) -> usize {
        self.channels / self.heads
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.scale != 4 && self.scale != 8 {
            return bad(format!("scale must be 4 or 8, got {}", self.scale));
        }
        if self.stages == 0 || self.htl_depth == 0 {
            return bad("stages and htl_depth must be >= 1".into());
        }
        if self.channels == 0 || self.heads == 0 || self.channels % self.heads != 0 {
            return bad(format!("channels {} not divisible by heads {}", self.channels, self.heads));
        }
        if self.window == 0 {
            return bad("window must be >= 1".into());
        }
        if self.kernel == 0 || self.kernel % 2 == 0 {
            return bad(format!("kernel must be odd, got {}", self.kernel));
        }
        for (name, v) in [("lambda_t", self.lambda_t), ("lambda_o", self.lambda_o)] {
            if !(0.0..=1.0).contains(&v) {
                return bad(format!("{name} must lie in [0,1], got {v}"));
            }
        }
        if !(self.init_std > 0.0 && self.init_std.is_finite()) {
            return bad(format!("init_std must be positive, got {}", self.init_std));
        }
        let single = matches!(self.branch_mode, BranchMode::OnlySr | BranchMode::OnlyMc);
        if single && self.use_crme {
            return bad(format!("branch_mode {} has one branch; use_crme must be off", self.branch_mode));
        }
        if single && self.use_pdtm {
            return bad(format!("branch_mode {} has no optical edge prior; use_pdtm must be off", self.branch_mode));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_validate() {
        ModelConfig::default().validate().unwrap();
        ModelConfig::tiny().validate().unwrap();
        ModelConfig::desk().validate().unwrap();
    }

    #[test]
    fn rejects_inconsistent_flags() {
        let cfg = ModelConfig { branch_mode: BranchMode::OnlyMc, use_crme: false, ..ModelConfig::default() };
        assert!(matches!(cfg.validate(), Err(Error::Config(_))));
        let cfg = ModelConfig { heads: 5, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
        let cfg = ModelConfig { scale: 3, ..ModelConfig::default() };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn branch_mode_round_trips() {
        for m in BranchMode::ALL {
            assert_eq!(m.as_str().parse::<BranchMode>().unwrap(), m);
        }
        assert!("both".parse::<BranchMode>().is_err());
    }
}
