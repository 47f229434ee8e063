"""Plain data models: configurations, dataset records, grids, reports and errors."""
