from __future__ import annotations

import numpy as np


class SpectralBasis:
    """Real orthonormal Fourier basis on the periodic interval [-L, L).

    Mode 0 is the constant 1/sqrt(2L); mode m > 0 has wavenumber (m+1)//2 and
    is cos(pi k x / L)/sqrt(L) for odd m, sin(pi k x / L)/sqrt(L) for even m.
    Grid values live on ``grid_size`` equispaced points starting at -L; the
    grid is at least 3/2 times the retained band so cubic products are
    computed with the usual padding.
    """

    def __init__(self, half_length: float, n_modes: int):
        if n_modes < 1:
            raise ValueError("n_modes must be positive")
        self.half_length = float(half_length)
        self.n_modes = n_modes
        self.wavenumbers = (np.arange(n_modes) + 1) // 2
        k_max = int(self.wavenumbers.max())
        needed = 1.5 * (2 * k_max + 2)
        grid_size = 2
        while grid_size < needed:
            grid_size *= 2
        self.grid_size = grid_size
        self.points = -self.half_length + 2.0 * self.half_length * np.arange(grid_size) / grid_size
        # Grid starts at -L: shifting by L flips the sign of odd wavenumbers.
        self._sign = np.where(self.wavenumbers % 2 == 0, 1.0, -1.0)
        self._cos = np.zeros(n_modes, dtype=bool)
        self._cos[1::2] = True
        self._sin = np.zeros(n_modes, dtype=bool)
        self._sin[2::2] = True

    @property
    def eigenvalues(self) -> np.ndarray:
        """Laplacian eigenvalues -(pi k / L)^2, non-increasing in m."""
        return -((np.pi * self.wavenumbers / self.half_length) ** 2)

    @property
    def cell(self) -> float:
        """Quadrature weight of one grid point."""
        return 2.0 * self.half_length / self.grid_size

    def to_grid(self, coeffs: np.ndarray) -> np.ndarray:
        coeffs = np.asarray(coeffs, dtype=float) * self._sign
        n, L = self.grid_size, self.half_length
        spectrum = np.zeros(coeffs.shape[:-1] + (n // 2 + 1,), dtype=complex)
        spectrum[..., 0] = n * coeffs[..., 0] / np.sqrt(2.0 * L)
        k_cos = self.wavenumbers[self._cos]
        k_sin = self.wavenumbers[self._sin]
        spectrum[..., k_cos] += n * coeffs[..., self._cos] / (2.0 * np.sqrt(L))
        spectrum[..., k_sin] -= 1j * n * coeffs[..., self._sin] / (2.0 * np.sqrt(L))
        return np.fft.irfft(spectrum, n=n, axis=-1)

    def from_grid(self, values: np.ndarray) -> np.ndarray:
        """Discrete L2 projection of grid values onto the retained modes."""
        n, L = self.grid_size, self.half_length
        spectrum = np.fft.rfft(np.asarray(values, dtype=float), axis=-1)
        coeffs = np.empty(spectrum.shape[:-1] + (self.n_modes,))
        coeffs[..., 0] = np.sqrt(2.0 * L) * spectrum[..., 0].real / n
        coeffs[..., self._cos] = 2.0 * np.sqrt(L) * spectrum[..., self.wavenumbers[self._cos]].real / n
        coeffs[..., self._sin] = -2.0 * np.sqrt(L) * spectrum[..., self.wavenumbers[self._sin]].imag / n
        return coeffs * self._sign

    def cube(self, coeffs: np.ndarray) -> np.ndarray:
        """Projection of u^3 back onto the retained modes."""
        return self.from_grid(self.to_grid(coeffs) ** 3)

    def sup_norm(self, coeffs: np.ndarray) -> np.ndarray:
        return np.abs(self.to_grid(coeffs)).max(axis=-1)

    def __repr__(self) -> str:
        return f"SpectralBasis(L={self.half_length}, modes={self.n_modes}, grid={self.grid_size})"
