"""Market-efficiency test battery: Ljung-Box, runs and BDS tests plus their tail functions."""

from .randomness import (EfficiencyRow, EfficiencyTable, ReturnSample, TestReport,
                         autocorrelation, bds_test, correlation_integral, efficiency_table,
                         ljung_box, return_samples, runs_test, window_returns)
from .special import chi_square_sf, gammaincc, normal_sf

__all__ = [
    "EfficiencyRow", "EfficiencyTable", "ReturnSample", "TestReport", "autocorrelation",
    "bds_test", "correlation_integral", "efficiency_table", "ljung_box", "return_samples",
    "runs_test", "window_returns", "chi_square_sf", "gammaincc", "normal_sf",
]
