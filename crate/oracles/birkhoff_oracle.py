"""Direct-summation Birkhoff deviations for tau(x) = 1 + 0.1 cos 2 pi x under the golden rotation."""
import numpy as np

theta = (np.sqrt(5) - 1) / 2
M = 1000
xs = np.arange(M) / M
for q in [1, 2, 3, 5, 8, 13]:
    s = sum(1 + 0.1 * np.cos(2 * np.pi * ((xs + l * theta) % 1.0)) for l in range(q))
    dev = np.max(np.abs(s - q))
    exact = 0.1 * abs(np.sin(np.pi * q * theta) / np.sin(np.pi * theta))
    print(q, repr(dev), repr(exact))
