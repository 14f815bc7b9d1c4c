# feature packages; enabled ones are listed in features.json
