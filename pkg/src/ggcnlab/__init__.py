"""Graph learning lab: signed/degree-corrected propagation layers on a
small tape autodiff core, with closed-form propagation theory and the
Monte-Carlo machinery to check it."""

__version__ = "0.1.0"
