from storage.csv_backend import OutputBackend, load_config, load_csv

__all__ = ['OutputBackend', 'load_config', 'load_csv']
