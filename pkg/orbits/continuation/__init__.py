"""Energy continuation of minimising branches and crossing detection."""
