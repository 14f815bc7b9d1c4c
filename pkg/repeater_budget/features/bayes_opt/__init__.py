# feature package
