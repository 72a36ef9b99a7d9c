# Max capture facility location
