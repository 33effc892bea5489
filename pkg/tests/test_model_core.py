import dataclasses
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from spme_ident import parameters as pm
from spme_ident.ocp import DomainError, ocp, reference_stoichiometry
from spme_ident.parameters import ParameterError, ParameterSet
from spme_ident.voltage import (ElectrodeReadout, SingularityError, concentration_overpotential,
                                exchange_current_density, ohmic_losses, reaction_overpotential,
                                terminal_voltage)

F, R, T = 96485.0, 8.314472, 298.15
VT2 = 2 * R * T / F

TABLE = {
    "eps_n": 0.3, "eps_s": 1.0, "eps_p": 0.3,
    "c_max_n": 2.4983e4, "c_max_p": 5.1218e4,
    "sigma_n": 100.0, "sigma_p": 10.0,
    "D_n": 3.9e-14, "D_p": 1e-13,
    "R_n": 1e-5, "R_p": 1e-5,
    "a_n": 1.8e5, "a_p": 1.5e5,
    "m_n": 2e-5, "m_p": 6e-7,
    "L_n": 1e-4, "L_s": 2.5e-5, "L_p": 1e-4,
    "U_ref_n": 0.18, "U_ref_p": 3.94,
    "c_e_typ": 1e3, "D_e_typ": 5.34e-10, "kappa_e_typ": 1.1,
    "F": 96485.0, "R_gas": 8.314472, "T": 298.15, "brug": 1.5,
    "t_plus": 0.4, "I_typ": 24.0,
}


# ------------------------------------------------------------------ parameters

def test_defaults_reproduce_table(params):
    for name, value in TABLE.items():
        assert getattr(params, name) == value, name


@pytest.mark.parametrize("field,value", [("D_n", 0.0), ("L_s", -1e-6), ("eps_n", 0.0),
                                         ("eps_p", 1.2), ("t_plus", 1.0), ("c_max_p", -5.0)])
def test_invalid_parameters_rejected(field, value):
    with pytest.raises(ParameterError):
        ParameterSet(**{field: value})


def test_parameter_file_round_trip_is_bit_exact(tmp_path, params):
    path = tmp_path / "cell.txt"
    pm.save(params, path)
    assert pm.load(path) == params
    text = path.read_text()
    assert "n.eps = 0.3" in text and "p.c_max = 51218.0" in text and "s.L = 2.5e-05" in text


def test_parameter_file_partial_override_and_errors():
    p = pm.loads("p.D = 2e-13\n# comment\n")
    assert p.D_p == 2e-13 and p.D_n == TABLE["D_n"]
    with pytest.raises(ParameterError):
        pm.loads("q.D = 1")
    with pytest.raises(ParameterError):
        pm.loads("n.colour = 3")
    with pytest.raises(ParameterError):
        pm.loads("n.D 3")


@given(st.floats(1e-15, 1e-12), st.floats(0.05, 0.95), st.floats(0.1, 1.0))
def test_parameter_round_trip_property(D, tp, eps):
    p = ParameterSet(D_p=D, t_plus=tp, eps_s=eps)
    assert pm.loads(pm.dumps(p)) == p


# ------------------------------------------------------------------------- OCP

def test_reference_points_hit_table_potentials():
    x_n = reference_stoichiometry("graphite", 0.18)
    x_p = reference_stoichiometry("lco", 3.94)
    assert 0.5 < x_n < 0.6 and 0.7 < x_p < 0.8
    assert ocp("n", x_n) == pytest.approx(0.18, abs=1e-9)
    assert ocp("p", x_p) == pytest.approx(3.94, abs=1e-9)


@pytest.mark.parametrize("x", [-1e-9, 1.0 + 1e-9, math.nan])
def test_ocp_domain(x):
    for electrode in ("n", "p"):
        with pytest.raises(DomainError):
            ocp(electrode, x)


def test_ocp_unknown_electrode():
    with pytest.raises(ValueError):
        ocp("s", 0.5)


def test_ocp_smooth_and_finite_on_grid():
    x = np.linspace(0.0, 1.0, 20001)
    for electrode in ("n", "p"):
        u = ocp(electrode, x)
        assert np.all(np.isfinite(u))
        # no jumps: successive differences bounded by a steep-but-smooth slope
        assert np.max(np.abs(np.diff(u))) < 0.01


def test_flat_negative_ocp_at_poorly_identifiable_points():
    # the flattest negative-electrode slopes among the 11 points sit at 0.31 and 0.67
    xs = np.array([0.80, 0.73, 0.67, 0.61, 0.55, 0.49, 0.43, 0.37, 0.31, 0.25, 0.19])
    h = 1e-5
    slopes = np.abs((ocp("n", xs + h) - ocp("n", xs - h)) / (2 * h))
    flattest = set(np.argsort(slopes)[:3] + 1)
    assert flattest == {3, 4, 9}


# -------------------------------------------------------- algebraic relations

def test_exchange_current_density_oracle():
    c = 2.4983e4 / 2
    expected = 2e-5 * math.sqrt(c * (2.4983e4 - c) * 1000.0)
    j0 = exchange_current_density(2e-5, c, 2.4983e4, 1000.0)
    assert j0 == pytest.approx(expected, rel=1e-14)
    assert j0 == pytest.approx(7.90, rel=1e-3)


@pytest.mark.parametrize("c_ss", [0.0, 2.4983e4])
def test_exchange_current_density_vanishes_at_ends(c_ss):
    assert exchange_current_density(2e-5, c_ss, 2.4983e4, 1000.0) == 0.0


@pytest.mark.parametrize("args", [(2e-5, -1.0, 2.4983e4, 1000.0), (2e-5, 100.0, 2.4983e4, -1.0),
                                  (2e-5, 3e4, 2.4983e4, 1000.0)])
def test_exchange_current_density_domain(args):
    with pytest.raises(DomainError):
        exchange_current_density(*args)


def test_reaction_overpotential_oracle():
    eta = reaction_overpotential(24.0, 1.8e5, 1e-4, 7.90)
    assert eta == pytest.approx(-VT2 * math.asinh(24.0 / (1.8e5 * 7.90 * 1e-4)), rel=1e-14)
    assert eta == pytest.approx(-8.63e-3, rel=1e-3)
    assert reaction_overpotential(0.0, 1.8e5, 1e-4, 7.90) == 0.0
    assert reaction_overpotential(0.0, 1.8e5, 1e-4, 0.0) == 0.0
    with pytest.raises(SingularityError):
        reaction_overpotential(1.0, 1.8e5, 1e-4, 0.0)


@given(st.floats(-100, 100), st.floats(0.01, 50))
def test_reaction_overpotential_is_odd(I, j0):
    assert reaction_overpotential(-I, 1.8e5, 1e-4, j0) == -reaction_overpotential(I, 1.8e5, 1e-4, j0)


def test_concentration_overpotential_oracle(params):
    expected = VT2 / 1000.0 * 0.6 * (-20.0)
    eta = concentration_overpotential(990.0, 1010.0, 0.4, params)
    assert eta == pytest.approx(expected, rel=1e-12)
    assert eta == pytest.approx(-6.17e-4, rel=1e-3)
    assert concentration_overpotential(1000.0, 1000.0, 0.4) == 0.0
    assert concentration_overpotential(990.0, 1010.0, 1.0) == 0.0
    with pytest.raises(DomainError):
        concentration_overpotential(-1.0, 1000.0, 0.4)


def test_ohmic_losses_oracle(params):
    elec, solid = ohmic_losses(24.0, params)
    b = 1.5
    expected_elec = -(24.0 / 1.1) * (1e-4 / (3 * 0.3 ** b) + 2.5e-5 / 1.0 + 1e-4 / (3 * 0.3 ** b))
    expected_solid = -(24.0 / 3) * (1e-4 / 10.0 + 1e-4 / 100.0)
    assert elec == pytest.approx(expected_elec, rel=1e-14)
    assert solid == pytest.approx(expected_solid, rel=1e-14)
    assert elec == pytest.approx(-9.40e-3, rel=1e-3)
    assert solid == pytest.approx(-8.8e-5, rel=1e-3)
    assert ohmic_losses(0.0, params) == (0.0, 0.0)


@given(st.floats(-200, 200), st.floats(-5, 5))
def test_ohmic_losses_linear(I, k):
    e1, s1 = ohmic_losses(I)
    e2, s2 = ohmic_losses(k * I)
    assert e2 == pytest.approx(k * e1, rel=1e-12, abs=1e-300)
    assert s2 == pytest.approx(k * s1, rel=1e-12, abs=1e-300)


@given(st.floats(0.0, 2.4983e4 / 2), st.floats(1.0, 3000.0))
def test_exchange_current_symmetry(c, ce):
    # exact complements: both subtractions are exact for c <= c_max / 2
    mirror = 2.4983e4 - c
    c = 2.4983e4 - mirror
    a = exchange_current_density(2e-5, c, 2.4983e4, ce)
    b = exchange_current_density(2e-5, mirror, 2.4983e4, ce)
    assert a == pytest.approx(b, rel=1e-12, abs=1e-300)


# ------------------------------------------------------------ terminal voltage

def _readout(params, x_n=0.5, x_p=0.6, c_n=1000.0, c_p=1000.0):
    return ElectrodeReadout(x_n * params.c_max_n, x_p * params.c_max_p, c_n, c_p)


def test_rest_voltage_is_ocv(params):
    r = _readout(params)
    b = terminal_voltage(r, 0.0, 0.4, params)
    assert b.U_eq == ocp("p", 0.6) - ocp("n", 0.5)
    assert (b.eta_r, b.eta_c, b.dphi_elec, b.dphi_solid) == (0.0, 0.0, 0.0, 0.0)
    assert b.total == b.U_eq


def test_loaded_voltage_matches_component_oracles(params):
    r = _readout(params, 0.5, 0.6, 1010.0, 990.0)
    I = 24.0
    b = terminal_voltage(r, I, 0.4, params)
    j0n = exchange_current_density(params.m_n, r.c_ss_n, params.c_max_n, 1010.0)
    j0p = exchange_current_density(params.m_p, r.c_ss_p, params.c_max_p, 990.0)
    eta_r = -VT2 * (math.asinh(I / (params.a_n * j0n * params.L_n))
                    + math.asinh(I / (params.a_p * j0p * params.L_p)))
    expected = (ocp("p", 0.6) - ocp("n", 0.5) + eta_r + VT2 / 1000.0 * 0.6 * (-20.0)
                - (I / 1.1) * (2e-4 / (3 * 0.3 ** 1.5) + 2.5e-5) - (I / 3) * (1e-5 + 1e-6))
    assert b.total == pytest.approx(expected, abs=1e-12)
    assert b.eta_r < 0 and b.eta_c < 0
    # discharge lowers the voltage below the OCV
    assert b.total < b.U_eq


def test_theta_object_accepted(params, theta):
    r = _readout(params, c_n=1010.0, c_p=990.0)
    assert terminal_voltage(r, 5.0, theta, params) == terminal_voltage(r, 5.0, 0.4, params)


def test_readout_invariants_enforced(params):
    with pytest.raises(DomainError):
        terminal_voltage(ElectrodeReadout(-1.0, 1e4, 1000.0, 1000.0), 0.0, 0.4, params)
    with pytest.raises(DomainError):
        terminal_voltage(ElectrodeReadout(1e4, 1e4, 0.0, 1000.0), 0.0, 0.4, params)


@given(st.floats(0.01, 0.99), st.floats(0.01, 0.99), st.floats(-100, 100),
       st.floats(500, 1500), st.floats(500, 1500), st.floats(0.05, 0.95))
def test_breakdown_total_is_sum(x_n, x_p, I, cn, cp, tp):
    p = ParameterSet()
    b = terminal_voltage(_readout(p, x_n, x_p, cn, cp), I, tp, p)
    parts = b.U_eq + b.eta_r + b.eta_c + b.dphi_elec + b.dphi_solid
    assert abs(b.total - parts) <= 1e-12


@given(st.floats(0.05, 0.95), st.floats(0.05, 0.95), st.floats(0.1, 100),
       st.floats(-50, 50), st.floats(0.05, 0.95))
def test_overpotentials_odd_in_current(x_n, x_p, I, dc, tp):
    p = ParameterSet()
    r = _readout(p, x_n, x_p, 1000.0 + dc, 1000.0 - dc)
    fwd = terminal_voltage(r, I, tp, p)
    rev = terminal_voltage(r, -I, tp, p)
    assert rev.eta_r == pytest.approx(-fwd.eta_r, rel=1e-12, abs=1e-15)
    mirror = terminal_voltage(_readout(p, x_n, x_p, 1000.0 - dc, 1000.0 + dc), I, tp, p)
    assert mirror.eta_c == pytest.approx(-fwd.eta_c, rel=1e-12, abs=1e-15)
    assert rev.dphi_elec == -fwd.dphi_elec and rev.dphi_solid == -fwd.dphi_solid


def test_parameter_set_is_frozen(params):
    with pytest.raises(dataclasses.FrozenInstanceError):
        params.D_n = 1.0
