"""Models, errors and logging shared by every EDNN component."""
