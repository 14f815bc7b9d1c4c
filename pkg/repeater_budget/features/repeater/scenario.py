# repeater_budget/features/repeater/scenario.py
"""
Scenario documents: emitter, efficiency-chain inputs, repeater constants and an
optional efficiency sweep, in one JSON file.

    {
      "emitter": "SnV",
      "chain": {"f_p": 46.4, "beta_wg": 0.929, "beta_f": 0.994, "alpha_deg": 0},
      "repeater": {"l_km": 1000, "eps_r": 1e-4},
      "sweep": {"eta_from": 0.85, "eta_to": 0.99, "steps": 100, "tau_ph_mode": "fixed"}
    }
"""
import math
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Optional, Tuple, Union

import numpy as np

from ...utils.config_loader import check_keys, load_feature_config, load_json_document, save_json_document
from ...utils.errors import ValidationError
from ..emitter.core import EmitterSpec, get_preset, purcell_lifetime
from .core import EfficiencyChain, RepeaterScenario, emitter_efficiency

TOP_KEYS = ("emitter", "chain", "repeater", "sweep")
CHAIN_KEYS = ("f_p", "beta_wg", "beta_f", "alpha_deg")
SWEEP_KEYS = ("eta_from", "eta_to", "steps", "tau_ph_mode", "purcell_anchors", "purcell_interp", "tau_cz_ratio")
TAU_PH_MODES = ("fixed", "purcell")
PURCELL_INTERPS = ("design", "linear")
ANCHOR_TOL = 1e-9


@dataclass(frozen=True)
class ChainInputs:
    f_p: float = 46.4
    beta_wg: float = 0.929
    beta_f: float = 0.994
    alpha_deg: float = 0.0

    def __post_init__(self):
        if not self.f_p >= 0:
            raise ValidationError("f_p must be >= 0", field="chain.f_p")
        for name in ("beta_wg", "beta_f"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValidationError(f"{name} must lie in [0, 1]", field=f"chain.{name}")

    def chain(self, spec: EmitterSpec) -> EfficiencyChain:
        return EfficiencyChain.from_purcell(spec, self.f_p, self.beta_wg, self.beta_f,
                                           math.radians(self.alpha_deg))


@dataclass(frozen=True)
class SweepSpec:
    eta_from: float = 0.85
    eta_to: float = 0.99
    steps: int = 100
    tau_ph_mode: str = "fixed"
    purcell_anchors: Tuple[Tuple[float, float], ...] = ((0.886, 46.4), (0.974, 270.2))
    purcell_interp: str = "design"
    tau_cz_ratio: float = 10.0

    def __post_init__(self):
        if not 0.0 < self.eta_from <= 1.0 or not 0.0 < self.eta_to <= 1.0:
            raise ValidationError("sweep range must lie in (0, 1]", field="sweep.eta_from")
        if int(self.steps) < 1:
            raise ValidationError("steps must be >= 1", field="sweep.steps")
        if self.tau_ph_mode not in TAU_PH_MODES:
            raise ValidationError(f"tau_ph_mode must be one of {TAU_PH_MODES}", field="sweep.tau_ph_mode")
        etas = [a[0] for a in self.purcell_anchors]
        if not etas or any(b <= a for a, b in zip(etas, etas[1:])):
            raise ValidationError("purcell_anchors need increasing eta values", field="sweep.purcell_anchors")
        if self.purcell_interp not in PURCELL_INTERPS:
            raise ValidationError(f"purcell_interp must be one of {PURCELL_INTERPS}", field="sweep.purcell_interp")
        if not self.tau_cz_ratio >= 0:
            raise ValidationError("tau_cz_ratio must be >= 0", field="sweep.tau_cz_ratio")

    def purcell_factor(self, eta: float) -> float:
        """
        F_P at efficiency eta.

        "design": each anchor is a cavity design and eta takes the first design whose
        efficiency reaches it; the shortfall is waveguide loss at that design's F_P.
        "linear": F_P interpolated between anchors. Both clamp outside the anchors.
        """
        xs = [a[0] for a in self.purcell_anchors]
        ys = [a[1] for a in self.purcell_anchors]
        if self.purcell_interp == "linear":
            return float(np.interp(eta, xs, ys))
        i = int(np.searchsorted(xs, eta - ANCHOR_TOL, side="left"))
        return float(ys[min(i, len(ys) - 1)])


@dataclass(frozen=True)
class ScenarioFile:
    emitter: Union[str, EmitterSpec] = "SnV"
    chain_inputs: ChainInputs = field(default_factory=ChainInputs)
    repeater: RepeaterScenario = field(default_factory=RepeaterScenario)
    sweep: Optional[SweepSpec] = None

    def emitter_spec(self, presets: Optional[Dict[str, EmitterSpec]] = None) -> EmitterSpec:
        if isinstance(self.emitter, EmitterSpec):
            return self.emitter
        return get_preset(self.emitter, presets)

    def eta_emitter(self, presets=None) -> float:
        return emitter_efficiency(self.chain_inputs.chain(self.emitter_spec(presets)))

    def timing(self, presets=None) -> Optional[Callable[[float], Tuple[float, float]]]:
        """(tau_ph, tau_cz) per efficiency under the Purcell reading; None for fixed times."""
        if self.sweep is None or self.sweep.tau_ph_mode == "fixed":
            return None
        spec = self.emitter_spec(presets)
        sweep = self.sweep

        def timing(eta):
            tau_ph = purcell_lifetime(spec, sweep.purcell_factor(eta))
            return tau_ph, sweep.tau_cz_ratio * tau_ph

        return timing

    @classmethod
    def from_document(cls, doc: Dict[str, Any], path: str = "scenario") -> "ScenarioFile":
        check_keys(doc, TOP_KEYS, path)
        emitter = doc.get("emitter", load_feature_config("repeater").get("emitter", "SnV"))
        if isinstance(emitter, dict):
            emitter = EmitterSpec.from_document(emitter, path=f"{path}.emitter")
        elif not isinstance(emitter, str):
            raise ValidationError("emitter must be a preset name or an object", field=f"{path}.emitter")

        chain_doc = doc.get("chain", {})
        check_keys(chain_doc, CHAIN_KEYS, f"{path}.chain")
        defaults = ChainInputs()
        chain = ChainInputs(
            f_p=float(chain_doc.get("f_p", defaults.f_p)),
            beta_wg=float(chain_doc.get("beta_wg", defaults.beta_wg)),
            beta_f=float(chain_doc.get("beta_f", defaults.beta_f)),
            alpha_deg=float(chain_doc.get("alpha_deg", 0.0)),
        )
        repeater = RepeaterScenario.from_document(doc.get("repeater", {}), path=f"{path}.repeater")

        sweep = None
        if "sweep" in doc:
            sd = doc["sweep"]
            check_keys(sd, SWEEP_KEYS, f"{path}.sweep")
            base = SweepSpec()
            anchors = sd.get("purcell_anchors", base.purcell_anchors)
            try:
                anchors = tuple((float(e), float(fp)) for e, fp in anchors)
            except (TypeError, ValueError) as e:
                raise ValidationError("purcell_anchors must be [[eta, f_p], ...]",
                                      field=f"{path}.sweep.purcell_anchors") from e
            sweep = SweepSpec(
                eta_from=float(sd.get("eta_from", base.eta_from)),
                eta_to=float(sd.get("eta_to", base.eta_to)),
                steps=int(sd.get("steps", base.steps)),
                tau_ph_mode=str(sd.get("tau_ph_mode", base.tau_ph_mode)),
                purcell_anchors=anchors,
                purcell_interp=str(sd.get("purcell_interp", base.purcell_interp)),
                tau_cz_ratio=float(sd.get("tau_cz_ratio", base.tau_cz_ratio)),
            )
        return cls(emitter=emitter, chain_inputs=chain, repeater=repeater, sweep=sweep)

    def to_document(self) -> Dict[str, Any]:
        doc = {
            "emitter": self.emitter.to_document() if isinstance(self.emitter, EmitterSpec) else self.emitter,
            "chain": {
                "f_p": self.chain_inputs.f_p,
                "beta_wg": self.chain_inputs.beta_wg,
                "beta_f": self.chain_inputs.beta_f,
                "alpha_deg": self.chain_inputs.alpha_deg,
            },
            "repeater": self.repeater.to_document(),
        }
        if self.sweep is not None:
            doc["sweep"] = {
                "eta_from": self.sweep.eta_from,
                "eta_to": self.sweep.eta_to,
                "steps": int(self.sweep.steps),
                "tau_ph_mode": self.sweep.tau_ph_mode,
                "purcell_anchors": [list(a) for a in self.sweep.purcell_anchors],
                "purcell_interp": self.sweep.purcell_interp,
                "tau_cz_ratio": self.sweep.tau_cz_ratio,
            }
        return doc


def load_scenario(path: Optional[str]) -> ScenarioFile:
    """Scenario from a JSON file; None gives the built-in defaults."""
    if not path:
        return ScenarioFile.from_document({})
    return ScenarioFile.from_document(load_json_document(path))


def dump_scenario(scenario: ScenarioFile, path: str):
    save_json_document(path, scenario.to_document())
