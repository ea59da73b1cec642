"""Report templates and published reference values."""

# Published estimates per lattice kind, printed next to fitted values.
REFERENCE_MAX_WEIGHT = {
    "H": {"delta_e": 1.283, "alpha": 0.576, "gamma": 1.290, "zeta_fit": 0.579, "zeta_derived": 0.552,
          "d_f": 1.287, "kappa": 2.093, "d_f_from_kappa": 1.262},
    "Q": {"delta_e": 0.759, "alpha": 0.591, "gamma": 1.208, "zeta_fit": 0.602, "zeta_derived": 0.573,
          "d_f": 1.383, "kappa": 2.035, "d_f_from_kappa": 1.254},
    "T": {"delta_e": 0.454, "alpha": 0.867, "gamma": 1.507, "zeta_fit": 0.341, "zeta_derived": 0.363,
          "d_f": 1.360, "kappa": 2.168, "d_f_from_kappa": 1.271},
}

REFERENCE_RANDOM_LINK = {
    "H": {"delta_e": 1.115, "alpha": 0.508, "gamma": 1.259, "zeta_fit": 0.593, "zeta_derived": 0.593,
          "d_f": 1.250, "kappa": 2.034, "d_f_from_kappa": 1.254},
    "Q": {"delta_e": 0.655, "alpha": 0.506, "gamma": 1.252, "zeta_fit": 0.595, "zeta_derived": 0.597,
          "d_f": 1.253, "kappa": 2.003, "d_f_from_kappa": 1.250},
    "T": {"delta_e": 0.380, "alpha": 0.827, "gamma": 1.554, "zeta_fit": 0.354, "zeta_derived": 0.350,
          "d_f": 1.273, "kappa": 2.181, "d_f_from_kappa": 1.273},
}

REFERENCE_GROUND_COST_DENSITY = {"H": 0.703, "Q": 0.355, "T": 0.529}

REFERENCE_EPSILON = {
    "H": {"beta": 0.528, "tau": 3.001, "tau_from_beta": 2.893},
    "Q": {"beta": 0.535, "tau": 2.721, "tau_from_beta": 2.869},
    "T": {"beta": 0.445, "tau": 3.119, "tau_from_beta": 3.247},
}

REPORT_HEADER = """
    dimerlab fit report
    records: {records_path}
    mode: {mode}
    kinds: {kinds}
    """

KIND_HEADER = """
    == {kind} lattice, sizes {sizes} ==
    """

EXPONENT_ROW = "    {name:<22} {value:>10.4f} +/- {error:<8.4f} reference {reference}"

MISSING_ROW = "    {name:<22}          -   skipped: {reason}"

DENSITY_ROW = "    L={L:<5} <E[D*]>/N = {value:.4f} +/- {error:.4f}   <dE> = {delta:.4f} +/- {delta_error:.4f}"

DEPARTURE_ROW = "    L={L:<5} eps* = {value:.4f} +/- {error:.4f} ({never} instances never left the ground state)"

TENSION_ROW = "    {name:<22} {value:.2f} sigma"

COUNT_LINE = "{label:<8} Z({m},{n}) = {value}"
