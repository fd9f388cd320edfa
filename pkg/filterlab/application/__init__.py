"""Application layer: filters, metrics and the experiment builders."""
