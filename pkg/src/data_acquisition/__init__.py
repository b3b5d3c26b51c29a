"""Rolling-stock and route loading and discretization."""
