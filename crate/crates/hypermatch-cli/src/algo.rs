//! Solver selection by name, with `--psi` / `--adaptive` modifiers.

use hypermatch::qap::PsiKind;
use hypermatch::solvers::{
    adapt_bcagm3, adapt_bcagm3_psi, bcagm3, bcagm3_psi, lifted4_solve, Lifted4Variant,
};
use hypermatch::{SolverConfigF64, SolverResultF64, SparseTensor3F64};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Family {
    Order3,
    Order4,
    /// Second-order baseline on the pairwise affinity matrix.
    Pairwise,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct AlgoSpec {
    pub family: Family,
    pub adaptive: bool,
    pub psi: Option<PsiKind>,
}

impl AlgoSpec {
    /// Parses names like `bcagm3`, `adapt-bcagm3-mp`, `bcagm4+ipfp`, `ipfp2`.
    pub fn parse(name: &str) -> Result<Self, String> {
        let lower = name.to_ascii_lowercase();
        let mut rest = lower.as_str();
        if rest == "ipfp2" {
            return Ok(Self {
                family: Family::Pairwise,
                adaptive: false,
                psi: None,
            });
        }
        let adaptive = if let Some(r) = rest.strip_prefix("adapt-") {
            rest = r;
            true
        } else {
            false
        };
        let (base, psi_part) = match rest.split_once(['-', '+']) {
            Some((b, p)) => (b, Some(p)),
            None => (rest, None),
        };
        let family = match base {
            "bcagm3" => Family::Order3,
            "bcagm" | "bcagm4" => Family::Order4,
            _ => return Err(format!("unknown algorithm `{name}`")),
        };
        let psi = match psi_part {
            None => None,
            Some("ipfp") => Some(PsiKind::Ipfp),
            Some("mp") | Some("mpm") => Some(PsiKind::Mpm),
            Some(other) => return Err(format!("unknown subroutine `{other}` in `{name}`")),
        };
        Ok(Self {
            family,
            adaptive,
            psi,
        })
    }

    pub fn with_flags(mut self, psi: Option<PsiKind>, adaptive: bool) -> Result<Self, String> {
        if self.family == Family::Pairwise {
            if psi.is_some() || adaptive {
                return Err("ipfp2 takes neither --psi nor --adaptive".into());
            }
            return Ok(self);
        }
        if let Some(p) = psi {
            self.psi = Some(p);
        }
        if adaptive {
            self.adaptive = true;
        }
        Ok(self)
    }

    /// Canonical display name, e.g. `adapt-bcagm3+mp`.
    pub fn name(&self) -> String {
        match self.family {
            Family::Pairwise => "ipfp2".into(),
            Family::Order3 | Family::Order4 => {
                let mut s = String::new();
                if self.adaptive {
                    s.push_str("adapt-");
                }
                s.push_str(if self.family == Family::Order3 {
                    "bcagm3"
                } else {
                    "bcagm4"
                });
                match self.psi {
                    Some(PsiKind::Ipfp) => s.push_str("+ipfp"),
                    Some(PsiKind::Mpm) => s.push_str("+mp"),
                    None => {}
                }
                s
            }
        }
    }

    /// Runs a tensor solver; `Pairwise` is handled by the caller.
    pub fn run_tensor(
        &self,
        tensor: &SparseTensor3F64,
        cfg: &SolverConfigF64,
    ) -> hypermatch::Result<SolverResultF64> {
        match (self.family, self.adaptive, self.psi) {
            (Family::Order3, false, None) => bcagm3(tensor, cfg),
            (Family::Order3, false, Some(p)) => bcagm3_psi(tensor, p, cfg),
            (Family::Order3, true, None) => adapt_bcagm3(tensor, cfg),
            (Family::Order3, true, Some(p)) => adapt_bcagm3_psi(tensor, p, cfg),
            (Family::Order4, adaptive, None) => {
                lifted4_solve(tensor, Lifted4Variant::Bcagm, adaptive, cfg)
            }
            (Family::Order4, adaptive, Some(p)) => {
                lifted4_solve(tensor, Lifted4Variant::BcagmPsi(p), adaptive, cfg)
            }
            (Family::Pairwise, _, _) => unreachable!("pairwise handled by caller"),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_round_trips_names() {
        for name in [
            "bcagm3",
            "bcagm3+ipfp",
            "bcagm3+mp",
            "adapt-bcagm3",
            "adapt-bcagm3+ipfp",
            "adapt-bcagm3+mp",
            "bcagm4",
            "bcagm4+mp",
            "adapt-bcagm4+ipfp",
            "ipfp2",
        ] {
            let spec = AlgoSpec::parse(name).unwrap();
            assert_eq!(spec.name(), name);
        }
    }

    #[test]
    fn parse_accepts_dash_and_alias() {
        assert_eq!(AlgoSpec::parse("bcagm3-mpm").unwrap().name(), "bcagm3+mp");
        assert_eq!(AlgoSpec::parse("adapt-bcagm-mp").unwrap().name(), "adapt-bcagm4+mp");
    }

    #[test]
    fn parse_rejects_unknown() {
        assert!(AlgoSpec::parse("rrwhm").is_err());
        assert!(AlgoSpec::parse("bcagm3+foo").is_err());
    }
}
