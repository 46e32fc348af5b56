"""Version DAG of artifact snapshots, persistence, and bundle exchange."""
