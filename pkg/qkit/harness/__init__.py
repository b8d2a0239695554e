"""Monte-Carlo runner, classical certifier, wire transport and reports."""
