# coding=utf-8
"""
.. moduleauthor:: lacsh developers

The module :mod:`spatial` computes great-circle distances between units and the exponential-decay spatial correlation
``rho = exp(-d / phi)`` that shapes the covariance of the latent health.

Distances are in megameters (1 Mm = 1000 km) on a sphere of mean radius :data:`EARTH_RADIUS_MM`, so that *phi* is
reported in megameters as well. Each unit is represented by a single point, usually its capital city.
"""
import dataclasses

import numpy as np

from .entity import validate_coordinates
from .errors import NonpositivePhi, NonpositiveVariance, InvalidCoordinate

#: mean earth radius in megameters
EARTH_RADIUS_MM = 6.371


@dataclasses.dataclass
class DistanceMatrix:
    """
    Symmetric matrix of great-circle distances in megameters with a zero diagonal.
    """
    D: np.ndarray
    earth_radius: float = EARTH_RADIUS_MM

    @property
    def N(self):
        return self.D.shape[0]


@dataclasses.dataclass
class SpatialCorrelation:
    """
    The correlation matrix ``Omega[n, m] = exp(-D[n, m] / phi)`` together with its *phi*.
    """
    Omega: np.ndarray
    phi: float


def _haversine(lat1, lon1, lat2, lon2, radius):
    lat1, lon1, lat2, lon2 = (np.radians(v) for v in (lat1, lon1, lat2, lon2))
    hav = np.sin((lat2 - lat1) / 2) ** 2 + np.cos(lat1) * np.cos(lat2) * np.sin((lon2 - lon1) / 2) ** 2
    return 2 * radius * np.arcsin(np.sqrt(np.clip(hav, 0.0, 1.0)))


def great_circle_distance(a, b, radius=EARTH_RADIUS_MM):
    """
    Great-circle distance between two points by the haversine formula.

    :param a: (latitude, longitude) in degrees
    :param b: (latitude, longitude) in degrees
    :param radius: sphere radius in megameters
    :return: distance in megameters
    """
    validate_coordinates([a, b])
    if radius <= 0:
        raise InvalidCoordinate('the sphere radius must be positive')
    return float(_haversine(a[0], a[1], b[0], b[1], radius))


def distance_matrix(coords, radius=EARTH_RADIUS_MM):
    """
    Pairwise great-circle distances.

    :param coords: N x 2 array of (latitude, longitude) in degrees
    :param radius: sphere radius in megameters
    :return: :class:`DistanceMatrix`
    """
    coords = np.asarray(coords, dtype=float).reshape(-1, 2)
    validate_coordinates(coords)
    lat, lon = coords[:, 0], coords[:, 1]
    D = _haversine(lat[:, None], lon[:, None], lat[None, :], lon[None, :], radius)
    D = (D + D.T) / 2
    np.fill_diagonal(D, 0.0)
    return DistanceMatrix(D=D, earth_radius=radius)


def correlation_matrix(D, phi):
    """
    Exponential-decay spatial correlation.

    :param D: :class:`DistanceMatrix` or a plain distance array
    :param phi: inverse decay rate in megameters
    :return: :class:`SpatialCorrelation`
    """
    if not (np.isfinite(phi) and phi > 0):
        raise NonpositivePhi('phi must be positive, got {}'.format(phi))
    d = D.D if isinstance(D, DistanceMatrix) else np.asarray(D, dtype=float)
    omega = np.exp(-d / phi)
    if omega.ndim == 2:
        np.fill_diagonal(omega, 1.0)
    return SpatialCorrelation(Omega=omega, phi=float(phi))


def h_covariance(sigma2_H, Omega):
    """
    Covariance of the latent health, ``Sigma_H = sigma2_H * Omega``.

    :param sigma2_H: spatial variance
    :param Omega: :class:`SpatialCorrelation` or a correlation array
    """
    if not (np.isfinite(sigma2_H) and sigma2_H > 0):
        raise NonpositiveVariance('sigma2_H must be positive, got {}'.format(sigma2_H))
    omega = Omega.Omega if isinstance(Omega, SpatialCorrelation) else np.asarray(Omega, dtype=float)
    return sigma2_H * omega


__all__ = ['EARTH_RADIUS_MM', 'DistanceMatrix', 'SpatialCorrelation', 'great_circle_distance', 'distance_matrix',
           'correlation_matrix', 'h_covariance']
